import numpy as np
import pytest
from hypothesis import settings

from mehlerkit.family import harmonic_oscillator, harmonic_schrodinger, kfp

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ho():
    return harmonic_oscillator()


@pytest.fixture(scope="session")
def hs():
    return harmonic_schrodinger()


@pytest.fixture(scope="session")
def kfp1():
    return kfp(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def ground_state(x):
    return np.pi**-0.25 * np.exp(-np.asarray(x) ** 2 / 2)
