"""Resolvent R(t, tau) of dR/dt = 2i F_t R, with the jointly integrated log-prefactor h.

The prefactor of the Weyl symbol is exp(h(t, tau)) where
dh/dt = (1/2) Tr(S F_t), S = -i (R - I)(R + I)^{-1}, h(tau, tau) = 0.
Integrating h alongside R keeps the square-root branch continuous in t; the
integration stops at the first time where det(R + I) vanishes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .family import HamiltonianFamily
from .symplectic import positivity_defect, sigma_matrix, symplectic_residual

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-10
MAX_STEPS = 200_000
# |det(R + I)| < DEGENERACY_THRESHOLD * 4^n flags a crossing
DEGENERACY_THRESHOLD = 1e-10

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
ORDER = 5


class ResolventError(RuntimeError):
    pass


class ToleranceError(ResolventError):
    """The requested tolerance could not be met within the step budget."""


class DegeneracyError(ResolventError):
    """det(R + I) vanishes between tau and t.

    ``partial`` is the resolvent at the last accepted time before the
    crossing; ``bracket`` is an interval (lo, hi) containing the crossing.
    """

    def __init__(self, message, bracket, partial):
        super().__init__(message)
        self.bracket = bracket
        self.partial = partial


@dataclass(frozen=True)
class IntegrationStats:
    steps: int = 0
    rejected: int = 0
    est_error: float = 0.0


@dataclass(frozen=True)
class Resolvent:
    n: int
    tau: float
    t: float
    R: np.ndarray
    h: complex | None
    stats: IntegrationStats = IntegrationStats()

    @property
    def det_plus_identity(self) -> complex:
        return complex(np.linalg.det(self.R + np.eye(2 * self.n)))

    @property
    def det_margin(self) -> float:
        """|det(R + I)| 2^{-2n}; equals 1 at t = tau."""
        return abs(self.det_plus_identity) / 4**self.n

    def symplectic_residual(self) -> float:
        return symplectic_residual(self.R)

    def det_residual(self) -> float:
        return abs(np.linalg.det(self.R) - 1.0)

    def positivity_min(self, samples: int = 100, seed: int = 0) -> float:
        """min over random complex unit X of i(sigma(conj RX, RX) - sigma(conj X, X))."""
        rng = np.random.default_rng(seed)
        m = 2 * self.n
        X = rng.normal(size=(m, samples)) + 1j * rng.normal(size=(m, samples))
        X /= np.linalg.norm(X, axis=0)
        return float(positivity_defect(self.R, X).min())


def _check_times(family: HamiltonianFamily, *times):
    for s in times:
        if not (0.0 <= s <= family.T):
            raise ValueError(f"time {s} outside [0, T={family.T}]")


class _Rhs:
    """Right-hand side on the flattened state (R entries, then optionally h)."""

    def __init__(self, family: HamiltonianFamily, with_prefactor: bool):
        self.family = family
        self.m = 2 * family.n
        self.with_prefactor = with_prefactor
        self.sigma = sigma_matrix(family.n)
        self.eye = np.eye(self.m)

    def unpack(self, y):
        R = y[: self.m * self.m].reshape(self.m, self.m)
        h = y[-1] if self.with_prefactor else None
        return R, h

    def pack(self, R, h=None):
        if self.with_prefactor:
            return np.concatenate([R.ravel(), [h]])
        return R.ravel().copy()

    def __call__(self, s, y):
        F = self.sigma @ self.family.matrix(s)
        R, _ = self.unpack(y)
        dR = 2j * F @ R
        if not self.with_prefactor:
            return dR.ravel()
        # S = -i (R - I)(R + I)^{-1} via a transposed solve
        S = -1j * np.linalg.solve((R + self.eye).T, (R - self.eye).T).T
        dh = 0.5 * np.trace(S @ F)
        return np.concatenate([dR.ravel(), [dh]])


def _det_plus_identity(R):
    return np.linalg.det(R + np.eye(R.shape[0]))


def _dopri_step(f, s, y, k1, step):
    ks = [k1]
    for i in range(1, 7):
        yi = y + step * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(s + _C[i] * step, yi))
    y5 = y + step * sum(b * k for b, k in zip(_B5, ks) if b)
    err = step * sum(e * k for e, k in zip(_E, ks))
    # FSAL: the last stage is f(s + step, y5)
    return y5, err, ks[-1]


def _hermite(y0, f0, y1, f1, step, theta):
    h00 = 2 * theta**3 - 3 * theta**2 + 1
    h10 = theta**3 - 2 * theta**2 + theta
    h01 = -2 * theta**3 + 3 * theta**2
    h11 = theta**3 - theta**2
    return h00 * y0 + h10 * step * f0 + h01 * y1 + h11 * step * f1


def _integrate(
    family: HamiltonianFamily,
    tau: float,
    t: float,
    rel_tol: float,
    with_prefactor: bool,
    y0=None,
    max_steps: int = MAX_STEPS,
):
    """Core adaptive loop. Returns (y, stats) or raises DegeneracyError/ToleranceError."""
    f = _Rhs(family, with_prefactor)
    m = f.m
    y = f.pack(np.eye(m, dtype=complex), 0j) if y0 is None else np.array(y0, dtype=complex)
    span = t - tau
    if span == 0:
        return y, IntegrationStats()
    direction = np.sign(span)
    s = tau
    k1 = f(s, y)
    fnorm = np.abs(k1[: m * m]).max()
    step = direction * min(abs(span), 0.05 / max(fnorm, 1e-3), 0.1)
    err_prev = 1.0
    steps = rejected = 0
    est_error = 0.0
    branch_tol = max(1e-6, 1e4 * rel_tol)
    det_floor = DEGENERACY_THRESHOLD * 4 ** family.n
    tiny = 1e-14 * max(1.0, abs(tau), abs(t))

    while direction * (t - s) > 0:
        if steps + rejected >= max_steps:
            raise ToleranceError(
                f"step budget {max_steps} exhausted at s={s:.6g} (target {t:.6g}, rel_tol={rel_tol:g})"
            )
        if direction * (s + step - t) > 0:
            step = t - s
        y_new, err_vec, k_new = _dopri_step(f, s, y, k1, step)
        scale = rel_tol * np.maximum(1.0, np.maximum(np.abs(y), np.abs(y_new)))
        err = float(np.max(np.abs(err_vec) / scale)) if np.all(np.isfinite(y_new)) else np.inf

        accept = err <= 1.0
        if accept and with_prefactor:
            R_new, h_new = f.unpack(y_new)
            d = _det_plus_identity(R_new)
            consistency = abs(np.exp(2 * h_new) * d / 4**family.n - 1.0)
            if not np.isfinite(consistency) or consistency > branch_tol:
                # the step jumped over (or into) a zero of det(R + I)
                accept = False
                err = max(err, 1e3)

        if not accept:
            rejected += 1
            factor = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** (-1.0 / ORDER))
            step *= factor
            if abs(step) < tiny:
                if with_prefactor:
                    _raise_degeneracy(family, s, s + 4 * step, y, f, rel_tol, steps, rejected, est_error, tau, force=True)
                raise ToleranceError(f"step size underflow at s={s:.6g}")
            continue

        steps += 1
        est_error += float(np.max(np.abs(err_vec)))
        s_new = s + step

        if with_prefactor:
            R_old, _ = f.unpack(y)
            R_new, _ = f.unpack(y_new)
            dets = [abs(_det_plus_identity(R_new))]
            for theta in (0.2, 0.4, 0.6, 0.8):
                yi = _hermite(y, k1, y_new, k_new, step, theta)
                dets.append(abs(_det_plus_identity(f.unpack(yi)[0])))
            if min(dets) < det_floor:
                _raise_degeneracy(family, s, s_new, y, f, rel_tol, steps, rejected, est_error, tau)

        s, y, k1 = s_new, y_new, k_new
        # PI step-size control
        err = max(err, 1e-10)
        factor = 0.9 * err ** (-0.7 / ORDER) * err_prev ** (0.4 / ORDER)
        step *= min(5.0, max(0.2, factor))
        err_prev = err

    return y, IntegrationStats(steps, rejected, est_error)


def _raise_degeneracy(family, s0, s1, y0, f, rel_tol, steps, rejected, est_error, tau, force=False):
    """Locate the minimum of |det(R + I)| near [s0, s1] and raise if it is a crossing.

    R alone is smooth through the crossing, so the search integrates R only,
    starting from the last accepted state.
    """
    R0, h0 = f.unpack(y0)
    m = f.m
    det_floor = DEGENERACY_THRESHOLD * 4**family.n

    def absdet(s):
        if s == s0:
            return abs(_det_plus_identity(R0))
        y, _ = _integrate(family, s0, s, min(rel_tol, 1e-12), False, y0=R0.ravel())
        return abs(_det_plus_identity(y.reshape(m, m)))

    width = s1 - s0
    # march past the flagged point until |det| grows, so [lo, hi] holds the minimum
    lo, mid = s0, s1
    prev = None
    probe = width
    for _ in range(60):
        cur = absdet(mid) if prev is None else prev
        nxt = mid + probe
        val = absdet(nxt)
        if val > cur:
            break
        lo, mid, prev = mid, nxt, val
        probe *= 2
    hi = nxt

    # golden-section search for the minimum of |det(R + I)| on [lo, hi]
    g = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = absdet(c), absdet(d)
    target_width = 1e-9 * max(1.0, abs(s0))
    for _ in range(200):
        if abs(b - a) <= target_width:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = absdet(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = absdet(d)
    s_star = (a + b) / 2
    fmin = min(fc, fd)
    if fmin >= det_floor and not force:
        return  # false alarm from interpolation; keep integrating
    if fmin < det_floor:
        # bracket = sublevel set {|det(R + I)| < floor} around s_star, edges by bisection
        left = _bisect_level(absdet, lo, s_star, det_floor, target_width)
        right = _bisect_level(absdet, hi, s_star, det_floor, target_width)
        bracket = (min(left, right), max(left, right))
    else:
        bracket = (min(lo, hi), max(lo, hi))
    partial = Resolvent(
        n=family.n,
        tau=tau,
        t=float(s0),
        R=R0.copy(),
        h=complex(h0),
        stats=IntegrationStats(steps, rejected, est_error),
    )
    logger.info("det(R+I) crossing near t=%.12g (|det| min %.3e)", s_star, fmin)
    raise DegeneracyError(
        f"det(R+I) vanishes near t={s_star:.12g} (bracket [{bracket[0]:.12g}, {bracket[1]:.12g}])",
        bracket=bracket,
        partial=partial,
    )


def _bisect_level(fun, outer, inner, level, width):
    """Point between ``outer`` (fun >= level) and ``inner`` (fun < level) where fun crosses level."""
    if fun(outer) < level:
        return outer
    for _ in range(100):
        if abs(outer - inner) <= width:
            break
        mid = (outer + inner) / 2
        if fun(mid) < level:
            inner = mid
        else:
            outer = mid
    return outer


def integrate_resolvent(
    family: HamiltonianFamily,
    tau: float,
    t: float,
    rel_tol: float = DEFAULT_REL_TOL,
    *,
    with_prefactor: bool = True,
    check_range: bool = True,
    max_steps: int = MAX_STEPS,
) -> Resolvent:
    """Integrate R(., tau) from tau to t (either direction).

    With ``with_prefactor`` the log-prefactor h is carried along and a
    :class:`DegeneracyError` is raised at the first zero of det(R + I).
    Without it only R is integrated and no degeneracy monitoring happens,
    which is what singular-space and wave-front computations need.
    ``check_range=False`` allows times outside [0, T] (closed-form tracks
    are defined on the whole line); finite-difference checks rely on it.
    """
    if check_range:
        _check_times(family, tau, t)
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    m = 2 * family.n
    if t == tau:
        return Resolvent(family.n, tau, t, np.eye(m, dtype=complex), 0j if with_prefactor else None)
    y, stats = _integrate(family, tau, t, rel_tol, with_prefactor, max_steps=max_steps)
    R = y[: m * m].reshape(m, m).copy()
    h = complex(y[-1]) if with_prefactor else None
    return Resolvent(family.n, float(tau), float(t), R, h, stats)


def resolvent_path(family: HamiltonianFamily, start: float, times, rel_tol: float = DEFAULT_REL_TOL):
    """R(s, start) for each s in ``times`` (monotone away from start), R only.

    One trajectory is continued through the requested times.
    """
    m = 2 * family.n
    out = []
    y = np.eye(m, dtype=complex).ravel()
    s = start
    for target in times:
        if target != s:
            y, _ = _integrate(family, s, target, rel_tol, False, y0=y)
            s = target
        out.append(y.reshape(m, m).copy())
    return out


def exact_autonomous_resolvent(F, span: float) -> np.ndarray:
    """exp(2i span F) by scipy's scaling-and-squaring expm (an independent oracle)."""
    from scipy.linalg import expm

    return expm(2j * span * np.asarray(F))


# -- structural checks ----------------------------------------------------------


def compose_check(family, t, r, tau, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """||R(t, r) R(r, tau) - R(t, tau)||."""
    if not (0 <= tau <= r <= t <= family.T):
        raise ValueError("need 0 <= tau <= r <= t <= T")
    Rtr = integrate_resolvent(family, r, t, rel_tol, with_prefactor=False).R
    Rrt = integrate_resolvent(family, tau, r, rel_tol, with_prefactor=False).R
    Rtt = integrate_resolvent(family, tau, t, rel_tol, with_prefactor=False).R
    return float(np.linalg.norm(Rtr @ Rrt - Rtt))


def adjoint_relation_check(family, tau, t, h_fd: float = 1e-4, rel_tol: float = 1e-13) -> float:
    """max entry of |dR/dtau (central difference) + 2i R(t, tau) F_tau|."""
    if not (0 <= tau <= t <= family.T):
        raise ValueError("need 0 <= tau <= t <= T")
    plus = integrate_resolvent(family, tau + h_fd, t, rel_tol, with_prefactor=False, check_range=False).R
    minus = integrate_resolvent(family, tau - h_fd, t, rel_tol, with_prefactor=False, check_range=False).R
    R = integrate_resolvent(family, tau, t, rel_tol, with_prefactor=False).R
    dR = (plus - minus) / (2 * h_fd)
    return float(np.abs(dR + 2j * R @ family.hamilton_matrix(tau)).max())


def inverse_check(family, tau, t, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """||R(t, tau) R(tau, t) - I||."""
    _check_times(family, tau, t)
    fwd = integrate_resolvent(family, tau, t, rel_tol, with_prefactor=False).R
    bwd = integrate_resolvent(family, t, tau, rel_tol, with_prefactor=False).R
    return float(np.linalg.norm(fwd @ bwd - np.eye(fwd.shape[0])))
