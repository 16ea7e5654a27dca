import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mehlerkit.family import constant_family, harmonic_oscillator, random_dissipative_family
from mehlerkit.resolvent import (
    DegeneracyError,
    ToleranceError,
    adjoint_relation_check,
    compose_check,
    exact_autonomous_resolvent,
    integrate_resolvent,
    inverse_check,
    resolvent_path,
)
from mehlerkit.symplectic import sigma_matrix


def random_dissipative_constant(rng, n=1):
    m = 2 * n
    A = rng.normal(size=(m, m))
    B = rng.normal(size=(m, m))
    return -(A @ A.T) / 2 + 1j * (B + B.T) / 2


def test_identity_at_equal_times(ho):
    res = integrate_resolvent(ho, 0.4, 0.4)
    assert np.array_equal(res.R, np.eye(2))
    assert res.h == 0
    assert res.det_margin == 1.0


def test_harmonic_oscillator_closed_form(ho):
    t = 1.0
    res = integrate_resolvent(ho, 0.0, t)
    c, s = np.cosh(2 * t), np.sinh(2 * t)
    # exp(2it F) with F = -sigma
    expected = np.array([[c, -1j * s], [1j * s, c]])
    assert np.abs(res.R - expected).max() <= 1e-8
    assert res.h == pytest.approx(-np.log(np.cosh(t)), abs=1e-9)


def test_harmonic_schrodinger_rotation(hs):
    for t in (0.3, 1.2):
        res = integrate_resolvent(hs, 0.0, t)
        expected = np.cos(2 * t) * np.eye(2) + np.sin(2 * t) * sigma_matrix(1)
        assert np.abs(res.R - expected).max() <= 1e-8
        assert res.h == pytest.approx(-np.log(np.cos(t)), abs=1e-8)


def test_autonomous_matches_expm(rng):
    for n in (1, 2):
        Q = random_dissipative_constant(rng, n)
        fam = constant_family(Q, T=2.0)
        F = fam.hamilton_matrix(0.0)
        res = integrate_resolvent(fam, 0.2, 1.1, with_prefactor=False)
        exact = exact_autonomous_resolvent(F, 0.9)
        assert np.abs(res.R - exact).max() <= 1e-8 * max(1.0, np.abs(exact).max())


def test_kfp_matches_expm(kfp1):
    res = integrate_resolvent(kfp1, 0.0, 1.0)
    assert np.abs(res.R - exact_autonomous_resolvent(kfp1.hamilton_matrix(0), 1.0)).max() <= 1e-8


def test_error_decreases_with_tolerance(ho):
    F = ho.hamilton_matrix(0)
    exact = exact_autonomous_resolvent(F, 1.0)
    errs = [np.abs(integrate_resolvent(ho, 0, 1.0, tol, with_prefactor=False).R - exact).max() for tol in (1e-6, 1e-8, 1e-10)]
    assert errs[0] > errs[1] > errs[2]
    # fifth order: 100x tighter tolerance buys at least a 10x smaller error
    assert errs[0] / errs[1] > 10


def test_backward_integration_is_inverse(ho):
    fwd = integrate_resolvent(ho, 0.1, 0.8, with_prefactor=False).R
    bwd = integrate_resolvent(ho, 0.8, 0.1, with_prefactor=False).R
    assert np.abs(fwd @ bwd - np.eye(2)).max() <= 1e-9


def test_compose_check_examples(ho):
    assert compose_check(ho, 0.7, 0.3, 0.0) <= 1e-7
    assert compose_check(ho, 0.7, 0.0, 0.0) <= 1e-9
    fam = random_dissipative_family(11, n=2, T=1.0)
    R = integrate_resolvent(fam, 0.0, 1.0).R
    assert compose_check(fam, 1.0, 0.4, 0.0) <= 10 * 1e-10 * np.linalg.norm(R) ** 2


def test_inverse_check_examples(ho):
    assert inverse_check(ho, 0.5, 0.5) == 0
    assert inverse_check(ho, 0.0, 0.5) <= 1e-8
    assert inverse_check(random_dissipative_family(5, n=1), 0.2, 0.9) <= 1e-9


def test_adjoint_relation(ho):
    assert adjoint_relation_check(ho, 0.2, 0.5) <= 1e-6
    # at t = tau the derivative is -2i F
    assert adjoint_relation_check(ho, 0.5, 0.5) <= 1e-6


def test_adjoint_relation_richardson():
    fam = random_dissipative_family(2, n=1, T=1.0)
    coarse = adjoint_relation_check(fam, 0.3, 0.8, h_fd=2e-3)
    fine = adjoint_relation_check(fam, 0.3, 0.8, h_fd=1e-3)
    assert 3.0 < coarse / fine < 5.0


def test_degeneracy_bracket(hs):
    with pytest.raises(DegeneracyError) as info:
        integrate_resolvent(hs, 0.0, 2.0)
    lo, hi = info.value.bracket
    assert lo <= np.pi / 2 <= hi
    assert hi - lo <= 1e-3
    partial = info.value.partial
    assert partial.t <= np.pi / 2
    assert np.exp(2 * partial.h) * partial.det_plus_identity / 4 == pytest.approx(1, abs=1e-8)


def test_degeneracy_backward(hs):
    with pytest.raises(DegeneracyError) as info:
        integrate_resolvent(hs, 3.0, 0.5)
    lo, hi = info.value.bracket
    assert lo <= 3.0 - np.pi / 2 <= hi


def test_no_degeneracy_check_without_prefactor(hs):
    R = integrate_resolvent(hs, 0.0, np.pi / 2, with_prefactor=False).R
    assert np.abs(R + np.eye(2)).max() <= 1e-8


def test_step_budget(ho):
    with pytest.raises(ToleranceError):
        integrate_resolvent(ho, 0.0, 5.0, 1e-12, max_steps=5)


def test_range_and_tolerance_validation(ho):
    with pytest.raises(ValueError):
        integrate_resolvent(harmonic_oscillator(T=1.0), 0.0, 1.5)
    with pytest.raises(ValueError):
        integrate_resolvent(ho, 0.0, 1.0, 0.0)


def test_resolvent_path_matches_single_calls(ho):
    times = [0.9, 0.5, 0.2]
    path = resolvent_path(ho, 1.0, times)
    for s, R in zip(times, path):
        assert np.abs(R - integrate_resolvent(ho, 1.0, s, with_prefactor=False).R).max() <= 1e-9


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.integers(1, 2), st.floats(0.05, 1.0))
def test_structural_invariants(seed, n, t):
    fam = random_dissipative_family(seed, n=n, T=1.0)
    res = integrate_resolvent(fam, 0.0, t, with_prefactor=False)
    norm2 = np.linalg.norm(res.R, 2) ** 2
    assert res.symplectic_residual() <= 1e-8 * norm2
    assert abs(np.linalg.det(res.R) - 1) <= 1e-8
    assert res.positivity_min(seed=seed) >= -1e-9 * norm2


def test_purely_imaginary_family_has_real_resolvent(rng):
    B = rng.normal(size=(4, 4))
    fam = constant_family(1j * (B + B.T), T=1.0)
    assert np.abs(integrate_resolvent(fam, 0.0, 0.6, with_prefactor=False).R.imag).max() <= 1e-9


def test_stats_are_reported(ho):
    res = integrate_resolvent(ho, 0.0, 1.0)
    assert res.stats.steps > 0
    assert res.stats.rejected >= 0
    assert res.stats.est_error >= 0
