import numpy as np
import pytest
from conftest import ground_state
from hypothesis import given, settings
from hypothesis import strategies as st

from mehlerkit.fio import GaussianState, GridFunction, GridParams, kernel_from_symbol, propagate_gaussian
from mehlerkit.symbol import mehler_symbol
from mehlerkit.wavefront import (
    ConicSet,
    DecayProfile,
    decay_profiles,
    detect_wavefront,
    predict_wavefront,
    stft,
    stft_at,
    supported_radius,
    write_profiles_csv,
)

TOL = 2 * np.pi / 64
BIG = GridParams.symmetric(2048, 40.0)
CONSTANT_WF = ConicSet.from_angles([0.0, np.pi], TOL)


def evolved_constant(family, t, grid=BIG) -> GridFunction:
    if t == 0:
        return GaussianState(0j).on_grid(grid)
    ker = kernel_from_symbol(mehler_symbol(family, 0.0, t))
    return propagate_gaussian(ker, GaussianState(0j)).on_grid(grid)


def _same(a: ConicSet, b: ConicSet, dilation=1e-9) -> bool:
    return a.is_subset(b, dilation) and b.is_subset(a, dilation)


# -- conic sets -----------------------------------------------------------------------------


def test_conic_set_normalizes_and_serializes():
    c = ConicSet(1, [[2.0, 0.0], [0.0, -3.0]], 0.1)
    assert np.allclose(c.angles, [0.0, 3 * np.pi / 2])
    back = ConicSet.from_json(c.to_json())
    assert _same(c, back) and back.angular_tol == 0.1
    with pytest.raises(ValueError):
        ConicSet(1, [[0.0, 0.0]], 0.1)


def test_empty_conic_set():
    e = ConicSet.empty(1, 0.1)
    assert len(e) == 0 and e.angle_to([1.0, 0.0]) == np.pi
    assert e.is_subset(CONSTANT_WF, 0.0)


# -- prediction -----------------------------------------------------------------------------


def test_prediction_at_zero_is_identity(ho, hs):
    for fam in (ho, hs):
        assert _same(predict_wavefront(fam, 0.0, CONSTANT_WF), CONSTANT_WF)


@pytest.mark.parametrize("t", [np.pi / 8, np.pi / 4, 3 * np.pi / 8, 1.0])
def test_schrodinger_rotates(hs, t):
    out = predict_wavefront(hs, t, CONSTANT_WF)
    expected = ConicSet.from_angles(np.array([0.0, np.pi]) - 2 * t, TOL)
    assert _same(out, expected, 1e-8)


def test_smoothing_families_empty(ho, kfp1):
    assert len(predict_wavefront(ho, 0.5, CONSTANT_WF)) == 0
    everything = ConicSet(2, np.vstack([np.eye(4), -np.eye(4)]), TOL)
    assert len(predict_wavefront(kfp1, 0.5, everything)) == 0


@settings(max_examples=20)
@given(st.lists(st.floats(0, 2 * np.pi), min_size=1, max_size=6), st.floats(0.01, 1.5), st.floats(0.1, 10.0))
def test_prediction_homogeneous_and_metaplectic(angles, t, scale):
    from mehlerkit.family import harmonic_schrodinger

    hs = harmonic_schrodinger()
    wf = ConicSet.from_angles(angles, TOL)
    scaled = ConicSet(1, scale * wf.directions, TOL)
    a = predict_wavefront(hs, t, wf)
    assert _same(a, predict_wavefront(hs, t, scaled), 1e-8)
    # a real symplectic map loses no direction
    assert len(a) == len(wf)


def test_prediction_dimension_mismatch(ho):
    with pytest.raises(ValueError):
        predict_wavefront(ho, 0.5, ConicSet.empty(2, 0.1))
    with pytest.raises(ValueError):
        predict_wavefront(ho, 20.0, CONSTANT_WF)


# -- STFT -----------------------------------------------------------------------------------


def test_stft_peak_at_packet_centre():
    g = GridParams.symmetric(512, 16.0)
    k0 = 25 * 2 * np.pi / (g.N * g.dx)
    u = GridFunction.from_function(lambda x: np.exp(-((x - 3.0) ** 2) / 2 + 1j * k0 * x), g)
    field = stft(u, 1.0, x_stride=4)
    i, j = np.unravel_index(np.argmax(field.magnitude), field.magnitude.shape)
    assert abs(field.x[i] - 3.0) <= 4 * g.dx
    assert field.xi[j] == pytest.approx(k0)
    assert np.abs(stft_at(u, [[3.0, k0]]))[0] == pytest.approx(field.magnitude.max(), rel=1e-12)


def test_stft_parseval():
    g = GridParams.symmetric(256, 12.0)
    u = GridFunction.from_function(lambda x: ground_state(x - 1) * np.exp(2j * x), g)
    assert stft(u, 0.8).energy() == pytest.approx(u.norm() ** 2, rel=1e-12)


def test_stft_window_too_wide():
    u = GridFunction.from_function(ground_state, GridParams.symmetric(64, 4.0))
    with pytest.raises(ValueError):
        stft(u, 3.0)


def test_stft_at_matches_fft_grid():
    g = GridParams.symmetric(256, 12.0)
    u = GridFunction.from_function(lambda x: ground_state(x) * np.exp(1j * x), g)
    field = stft(u, 1.0, x_stride=16)
    pts = [[field.x[5], field.xi[140]], [field.x[9], field.xi[100]]]
    direct = np.abs(stft_at(u, pts))
    assert np.allclose(direct, [field.magnitude[5, 140], field.magnitude[9, 100]], atol=1e-12)


# -- detection ------------------------------------------------------------------------------


@pytest.mark.parametrize("width", [0.5, 1.0, 2.0])
def test_gaussians_have_empty_wavefront(width):
    g = GridParams.symmetric(1024, 20.0)
    u = GridFunction.from_function(lambda x: np.exp(-(x**2) / (2 * width**2)), g)
    assert len(detect_wavefront(u)) == 0


def test_constant_wavefront():
    u = evolved_constant(None, 0)
    assert _same(detect_wavefront(u), CONSTANT_WF, TOL / 2)


@pytest.mark.parametrize("t", [np.pi / 8, np.pi / 4, 3 * np.pi / 8])
def test_detection_within_prediction(hs, t):
    detected = detect_wavefront(evolved_constant(hs, t))
    predicted = predict_wavefront(hs, t, CONSTANT_WF)
    assert len(detected) > 0
    assert detected.is_subset(predicted, 2 * TOL)


def test_heat_flow_smooths_constant(ho):
    u = evolved_constant(ho, 0.3)
    assert len(detect_wavefront(u)) == 0


def test_radius_validation():
    g = GridParams.symmetric(512, 16.0)
    u = GridFunction.from_function(ground_state, g)
    r = supported_radius(u)
    with pytest.raises(ValueError):
        decay_profiles(u, r_max=1.5 * r)
    with pytest.raises(ValueError):
        decay_profiles(u, r_min=3.0, r_max=2.0)


def test_synthetic_margin():
    g = GridParams.symmetric(512, 16.0)
    u = GridFunction.from_function(ground_state, g)
    assert supported_radius(u.with_samples(u.samples, synthetic=True)) < supported_radius(u)


def test_non_decaying_input_needs_synthetic_flag():
    g = GridParams.symmetric(256, 12.0)
    u = GridFunction.from_function(lambda x: np.ones_like(x), g)
    with pytest.raises(ValueError):
        detect_wavefront(u)
    detect_wavefront(u.with_samples(u.samples, synthetic=True), n_rays=8)


def test_profiles_csv(tmp_path):
    g = GridParams.symmetric(256, 12.0)
    u = GridFunction.from_function(ground_state, g)
    profiles = decay_profiles(u, n_rays=4, n_radii=5)
    write_profiles_csv(profiles, tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "theta,r,magnitude,fitted_order" and len(lines) == 1 + 4 * 5
    assert detect_wavefront(u, n_rays=4, profiles=profiles).angular_tol == pytest.approx(np.pi / 2)


def test_profile_validation():
    with pytest.raises(ValueError):
        DecayProfile(np.array([1.0, 0.0]), np.array([2.0, 1.0]), np.array([1.0, 1.0]), 1.0)
