import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mehlerkit.family import constant_family, kfp, random_dissipative_family
from mehlerkit.singular import (
    SubspaceBasis,
    autonomous_singular_space,
    full_space,
    null_space,
    principal_angle,
    smoothing_certificate,
    time_dependent_singular_space,
)


@pytest.mark.parametrize(
    "name, expected",
    [("ho", 0), ("hs", 2), ("kfp1", 0)],
)
def test_examples(request, name, expected):
    fam = request.getfixturevalue(name)
    S = time_dependent_singular_space(fam, 0.0, 1.0)
    assert S.dim == expected and S.stable
    assert autonomous_singular_space(fam.hamilton_matrix(0.0)).dim == expected


def test_kfp_without_friction_keeps_a_line():
    fam = kfp(0.0)
    S = time_dependent_singular_space(fam, 0.0, 1.0)
    assert S.dim == 1
    assert principal_angle(S, autonomous_singular_space(fam.hamilton_matrix(0.0))) <= 1e-6


def test_position_damping_keeps_momentum_axis():
    fam = constant_family(np.diag([-1.0, 0.0]), T=1.0)
    S = time_dependent_singular_space(fam, 0.0, 0.5)
    assert S.dim == 1
    assert abs(abs(S.basis[0] @ [0.0, 1.0]) - 1) <= 1e-12


@pytest.mark.parametrize("tol", [1e-10, 1e-8, 1e-6])
def test_tolerance_robustness(ho, hs, kfp1, tol):
    for fam, dim in ((ho, 0), (hs, 2), (kfp1, 0), (kfp(0.0), 1)):
        assert time_dependent_singular_space(fam, 0.0, 0.8, tol=tol).dim == dim


def test_equal_endpoints_give_full_space(ho):
    assert time_dependent_singular_space(ho, 0.4, 0.4).dim == 2


def test_refinement_does_not_increase_dimension(kfp1):
    dims = [time_dependent_singular_space(kfp1, 0.0, 0.6, n_tau=k).dim for k in (8, 16, 32)]
    assert dims == sorted(dims, reverse=True)


def test_interval_monotonicity():
    fam = kfp(0.0)
    short = time_dependent_singular_space(fam, 0.5, 0.6)
    long = time_dependent_singular_space(fam, 0.0, 0.6)
    assert long.dim <= short.dim


@settings(max_examples=8)
@given(st.integers(0, 1000))
def test_random_families_smooth(seed):
    fam = random_dissipative_family(seed, n=1)
    assert smoothing_certificate(fam, 0.5)


def test_smoothing_certificate(ho, hs):
    assert smoothing_certificate(ho, 0.1)
    assert not smoothing_certificate(hs, 0.1)
    with pytest.raises(ValueError):
        smoothing_certificate(ho, 0.0)


def test_argument_validation(ho):
    with pytest.raises(ValueError):
        time_dependent_singular_space(ho, 0.5, 0.2)
    with pytest.raises(ValueError):
        time_dependent_singular_space(ho, 0.0, 0.5, n_tau=4)


def test_null_space_floor():
    assert null_space(np.zeros((4, 2)), 1).dim == 2
    assert null_space(np.diag([1.0, 1e-12]), 1).dim == 1
    assert null_space(np.eye(2), 1).dim == 0


def test_autonomous_scaling_is_harmless(kfp1):
    F = kfp1.hamilton_matrix(0.0)
    for scale in (1e-3, 1.0, 50.0):
        assert autonomous_singular_space(scale * F).dim == 0
    assert autonomous_singular_space(kfp(0.0).hamilton_matrix(0.0) * 50.0).dim == 1


def test_principal_angle_dimension_mismatch():
    a = full_space(1)
    b = SubspaceBasis(1, np.array([[1.0, 0.0]]), 1e-8, ())
    assert principal_angle(a, b) == pytest.approx(np.pi / 2)
    assert principal_angle(b, b) == 0.0


def test_contains_and_json():
    line = SubspaceBasis(1, np.array([[0.0, 1.0]]), 1e-8, (1.0, 0.0))
    assert line.contains([1e-4, 1.0], 1e-3)
    assert not line.contains([1.0, 1.0], 1e-3)
    data = json.loads(json.dumps(line.to_json()))
    assert data == {"dim": 1, "vectors": [[0.0, 1.0]], "singular_values": [1.0, 0.0], "tol": 1e-8, "stable": True}
