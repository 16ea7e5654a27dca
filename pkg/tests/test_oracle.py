import numpy as np
import pytest
from conftest import ground_state

from mehlerkit.family import constant_family, random_dissipative_family
from mehlerkit.fio import GridFunction, GridParams, apply_kernel, grid_l2, kernel_from_symbol
from mehlerkit.oracle import assemble_weyl_operator, evolve, stable_step_count
from mehlerkit.symbol import mehler_symbol
from mehlerkit.symplectic import QuadraticForm

SMALL = GridParams.symmetric(128, 10.0)


def test_operator_on_ground_state(ho):
    # q^w = -(x^2 + D^2) and (x^2 + D^2) phi_0 = phi_0
    op = assemble_weyl_operator(ho.sample(0.0), SMALL)
    phi = ground_state(SMALL.x)
    assert np.abs(op @ phi + phi).max() <= 1e-8


def test_operator_on_plane_wave():
    q = QuadraticForm.from_matrix(np.diag([0.0, 1.0]))
    op = assemble_weyl_operator(q, SMALL)
    k = SMALL.wavenumbers[5]
    e = np.exp(1j * k * SMALL.x)
    assert np.abs(op @ e - k * k * e).max() <= 1e-10


def test_operator_mixed_term_is_symmetrized():
    # (x xi)^w = (xD + Dx)/2 is symmetric, so i (x xi)^w is anti-Hermitian
    q = QuadraticForm.from_matrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
    assert assemble_weyl_operator(q, SMALL).hermitian_residual() <= 1e-10


def test_real_symbol_gives_hermitian_matrix(ho):
    assert assemble_weyl_operator(ho.sample(0.0), SMALL).hermitian_residual() <= 1e-10


def test_evolve_ground_state(ho):
    g = GridParams.symmetric(256, 10.0)
    u = GridFunction.from_function(ground_state, g)
    out = evolve(ho, u, 0.5)
    assert np.abs(out.samples - np.exp(-0.5) * u.samples).max() <= 1e-6


def test_evolve_schrodinger_phase(hs):
    g = GridParams.symmetric(256, 10.0)
    u = GridFunction.from_function(ground_state, g)
    out = evolve(hs, u, 0.4)
    assert np.abs(out.samples - np.exp(-0.4j) * u.samples).max() <= 1e-6
    assert out.norm() == pytest.approx(u.norm(), rel=1e-8)


def test_evolve_zero_family():
    fam = constant_family(np.zeros((2, 2)), T=1.0)
    u = GridFunction.from_function(ground_state, SMALL)
    out = evolve(fam, u, 0.7)
    assert np.array_equal(out.samples, u.samples)


def test_norm_monotone_for_dissipative_family():
    fam = random_dissipative_family(2, n=1)
    u = GridFunction.from_function(ground_state, SMALL)
    _, norms = evolve(fam, u, 0.3, norm_history=True)
    assert np.all(np.diff(norms) <= 1e-12)


def test_too_few_steps_raises(ho):
    u = GridFunction.from_function(ground_state, SMALL)
    need = stable_step_count(ho, SMALL, 0.0, 0.2)
    with pytest.raises(ValueError):
        evolve(ho, u, 0.2, n_steps=need - 1)


def test_backward_start(ho):
    g = GridParams.symmetric(256, 10.0)
    u = GridFunction.from_function(ground_state, g)
    out = evolve(ho, u, 0.5, tau=0.3)
    assert np.abs(out.samples - np.exp(-0.2) * u.samples).max() <= 1e-6


def test_agrees_with_kernel_time_dependent():
    fam = random_dissipative_family(17, n=1)
    g = GridParams.symmetric(256, 10.0)
    u = GridFunction.from_function(lambda x: np.exp(-((x - 1) ** 2) / 2 + 0.5j * x), g)
    ref = evolve(fam, u, 0.25, tau=0.05)
    out = apply_kernel(kernel_from_symbol(mehler_symbol(fam, 0.05, 0.25)), u)
    assert grid_l2(ref.samples, out.samples, g.dx) <= 1e-8


def test_rejects_higher_dimension():
    fam = random_dissipative_family(0, n=2)
    u = GridFunction.from_function(ground_state, SMALL)
    with pytest.raises(ValueError):
        evolve(fam, u, 0.1)
