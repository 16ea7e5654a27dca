"""Gabor wave fronts: prediction through the resolvent and STFT-based detection (n = 1)."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .family import HamiltonianFamily
from .fio import GridFunction
from .parallel import pmap
from .resolvent import integrate_resolvent
from .singular import DEFAULT_TOL, full_space, time_dependent_singular_space

ANNIHILATED = 1e-10
DEFAULT_RAYS = 64
DEFAULT_ORDER_THRESHOLD = 4.0
DEFAULT_WINDOW = 1.0
DEFAULT_RADII = 32
# windows are cut where they fall below ~1e-14 of their peak
WINDOW_MARGIN = 8.0
FLOOR = 1e-12
DECAY_TOL = 1e-10


@dataclass(frozen=True)
class ConicSet:
    """Finite set of unit directions in R^{2n}, each standing for a thin cone."""

    n: int
    directions: np.ndarray
    angular_tol: float

    def __post_init__(self):
        d = np.array(self.directions, dtype=float).reshape(-1, 2 * self.n)
        norms = np.linalg.norm(d, axis=1)
        if np.any(norms == 0):
            raise ValueError("directions must be non-zero")
        d = d / norms[:, None]
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)

    @classmethod
    def from_angles(cls, angles, angular_tol: float) -> "ConicSet":
        a = np.asarray(angles, dtype=float).ravel()
        return cls(1, np.column_stack([np.cos(a), np.sin(a)]), angular_tol)

    @classmethod
    def empty(cls, n: int, angular_tol: float) -> "ConicSet":
        return cls(n, np.zeros((0, 2 * n)), angular_tol)

    def __len__(self) -> int:
        return self.directions.shape[0]

    @property
    def angles(self) -> np.ndarray:
        if self.n != 1:
            raise ValueError("angles are defined for n = 1")
        d = self.directions
        return np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)

    def angle_to(self, direction) -> float:
        """Smallest angle between ``direction`` and a member (pi if empty)."""
        if len(self) == 0:
            return np.pi
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        # chord form stays accurate for nearly parallel directions
        chord = np.linalg.norm(self.directions - d[None, :], axis=1)
        return float(2 * np.arcsin(np.clip(chord.min() / 2, 0.0, 1.0)))

    def is_subset(self, other: "ConicSet", dilation: float) -> bool:
        """Every member lies within ``dilation`` of some member of ``other``."""
        return all(other.angle_to(d) <= dilation for d in self.directions)

    def to_json(self) -> dict:
        return {"angles_radians": self.angles.tolist(), "angular_tol": self.angular_tol}

    @classmethod
    def from_json(cls, data) -> "ConicSet":
        if isinstance(data, str):
            data = json.loads(data)
        return cls.from_angles(data["angles_radians"], float(data.get("angular_tol", 2 * np.pi / DEFAULT_RAYS)))


# -- prediction -----------------------------------------------------------------------


def predict_wavefront(family: HamiltonianFamily, t: float, wf0: ConicSet, tol: float = DEFAULT_TOL) -> ConicSet:
    """Outer bound Re R(t, 0) WF(u0) intersected with S_{0,t}."""
    if not 0 <= t <= family.T:
        raise ValueError(f"need 0 <= t <= T={family.T}")
    if wf0.n != family.n:
        raise ValueError("dimension mismatch between family and wave front")
    R = integrate_resolvent(family, 0.0, t, with_prefactor=False).R
    S = time_dependent_singular_space(family, 0.0, t, tol=tol) if t > 0 else full_space(family.n, tol)
    kept = []
    for d in wf0.directions:
        image = R.real @ d
        norm = np.linalg.norm(image)
        if norm < ANNIHILATED:
            continue
        image = image / norm
        if S.contains(image, wf0.angular_tol):
            kept.append(image)
    if not kept:
        return ConicSet.empty(family.n, wf0.angular_tol)
    return ConicSet(family.n, np.array(kept), wf0.angular_tol)


# -- STFT -----------------------------------------------------------------------------


def gaussian_window(y, width: float) -> np.ndarray:
    """Unit L2-norm Gaussian of standard width ``width``."""
    return (np.pi * width**2) ** -0.25 * np.exp(-np.asarray(y) ** 2 / (2 * width**2))


@dataclass(frozen=True)
class StftField:
    """|V u|(x, xi) on a grid of window centres x and frequencies xi."""

    x: np.ndarray
    xi: np.ndarray
    magnitude: np.ndarray

    def energy(self) -> float:
        """sum |V|^2 dx dxi / (2 pi); equals ||u||^2 for the full field."""
        dx = self.x[1] - self.x[0]
        dxi = self.xi[1] - self.xi[0]
        return float(np.sum(self.magnitude**2) * dx * dxi / (2 * np.pi))


def stft(u: GridFunction, window_width: float = DEFAULT_WINDOW, x_stride: int = 1) -> StftField:
    """V(x, xi) = int u(y) phi(y - x) e^{-i y xi} dy by a windowed FFT.

    The window is wrapped periodically so that the discrete Parseval identity
    holds exactly for ``x_stride = 1``.
    """
    L = u.N * u.dx
    if window_width > L / 4:
        raise ValueError(f"window width {window_width} exceeds a quarter of the domain ({L / 4})")
    y = u.x
    centres = y[::x_stride]
    offset = np.mod(y[None, :] - centres[:, None] + L / 2, L) - L / 2
    windowed = u.samples[None, :] * gaussian_window(offset, window_width)
    V = np.fft.fftshift(np.fft.fft(windowed, axis=1), axes=1) * u.dx
    xi = np.fft.fftshift(u.grid.wavenumbers)
    return StftField(centres, xi, np.abs(V))


# -- detection ------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayProfile:
    direction: np.ndarray
    radii: np.ndarray
    stft_magnitudes: np.ndarray
    fitted_order: float

    def __post_init__(self):
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        if not np.all(np.isfinite(self.stft_magnitudes)):
            raise ValueError("magnitudes must be finite")

    @property
    def theta(self) -> float:
        return float(np.mod(np.arctan2(self.direction[1], self.direction[0]), 2 * np.pi))


def supported_radius(u: GridFunction, window_width: float = DEFAULT_WINDOW) -> float:
    """Largest phase-space radius on which the sampled STFT is trustworthy.

    Window centres must stay inside the domain (with a margin for non-decaying
    inputs, whose truncation at the grid edges is not part of the signal) and
    frequencies must stay inside the Nyquist band.
    """
    margin = WINDOW_MARGIN * window_width if u.synthetic else 0.0
    lo, hi = u.x0, u.x0 + (u.N - 1) * u.dx
    r_x = min(-lo, hi) - margin
    r_xi = np.pi / u.dx - WINDOW_MARGIN / window_width
    return float(min(r_x, r_xi))


def stft_at(u: GridFunction, points, window_width: float = DEFAULT_WINDOW) -> np.ndarray:
    """V u evaluated directly at phase-space points (rows (x, xi))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    y = u.x
    win = gaussian_window(y[None, :] - pts[:, :1], window_width)
    phase = np.exp(-1j * pts[:, 1:2] * y[None, :])
    return (win * phase) @ u.samples * u.dx


def fit_order(radii, magnitudes, floor: float) -> float:
    """-slope of log|V| against log r over samples above ``floor``; inf if fewer than 3."""
    mask = magnitudes > floor
    if mask.sum() < 3:
        return float("inf")
    slope = np.polyfit(np.log(radii[mask]), np.log(magnitudes[mask]), 1)[0]
    return float(-slope)


def decay_profiles(
    u: GridFunction,
    r_min: float | None = None,
    r_max: float | None = None,
    n_rays: int = DEFAULT_RAYS,
    window_width: float = DEFAULT_WINDOW,
    n_radii: int = DEFAULT_RADII,
) -> list[DecayProfile]:
    if not u.synthetic and u.edge_magnitude() > DECAY_TOL * max(1.0, np.abs(u.samples).max()):
        raise ValueError("input does not decay at the grid edges; mark it synthetic to analyse its truncation")
    supported = supported_radius(u, window_width)
    if r_max is None:
        r_max = 0.9 * supported
    if r_min is None:
        r_min = r_max / 2
    if r_max > supported:
        raise ValueError(f"r_max={r_max:.4g} exceeds the grid-supported radius {supported:.4g}")
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    radii = np.geomspace(r_min, r_max, n_radii)
    thetas = 2 * np.pi * np.arange(n_rays) / n_rays
    dirs = np.column_stack([np.cos(thetas), np.sin(thetas)])

    def ray(d):
        return np.abs(stft_at(u, radii[:, None] * d[None, :], window_width))

    mags = pmap(ray, dirs)
    peak = max(max(m.max() for m in mags), float(np.abs(stft_at(u, [[0.0, 0.0]], window_width))[0]))
    floor = FLOOR * peak
    return [DecayProfile(d, radii, m, fit_order(radii, m, floor)) for d, m in zip(dirs, mags)]


def detect_wavefront(
    u: GridFunction,
    r_min: float | None = None,
    r_max: float | None = None,
    n_rays: int = DEFAULT_RAYS,
    order_threshold: float = DEFAULT_ORDER_THRESHOLD,
    window_width: float = DEFAULT_WINDOW,
    profiles: list[DecayProfile] | None = None,
) -> ConicSet:
    """Directions along which |V u| decays slower than r^{-order_threshold}.

    Defaults: r_max = 0.9 * supported radius, r_min = r_max / 2. The fit
    uses the outer part of the range, where superpolynomial decay is steepest.
    """
    if profiles is None:
        profiles = decay_profiles(u, r_min, r_max, n_rays, window_width)
    singular = [p.direction for p in profiles if p.fitted_order < order_threshold]
    tol = 2 * np.pi / n_rays
    if not singular:
        return ConicSet.empty(1, tol)
    return ConicSet(1, np.array(singular), tol)


def write_profiles_csv(profiles, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "r", "magnitude", "fitted_order"])
        for p in profiles:
            for r, m in zip(p.radii, p.stft_magnitudes):
                w.writerow([repr(p.theta), repr(float(r)), repr(float(m)), repr(p.fitted_order)])
