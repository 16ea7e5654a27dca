"""Weyl symbol of the evolution operator via the generalized Mehler formula.

For tau <= t in the non-degenerate range the symbol is

    p(X) = c exp(<G X, X>),  c = exp(h(t, tau)) = 2^n det(R + I)^{-1/2},
    G = -sigma S,            S = -i (R - I)(R + I)^{-1},

so that <G X, X> = sigma(X, S X).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cosm, sinm

from .family import HamiltonianFamily, constant_family
from .resolvent import (
    DEFAULT_REL_TOL,
    DEGENERACY_THRESHOLD,
    DegeneracyError,
    Resolvent,
    integrate_resolvent,
)
from .symplectic import HamiltonMap, QuadraticForm, form_from_hamilton_map, sigma_matrix

FD_REL_TOL = 1e-13

DIRAC_NOTE = (
    "det(R+I) vanishes: the symbol is a tempered distribution here "
    "(for the harmonic Schrodinger flow at t = pi/2 + k pi, i(-1)^(k+1) pi delta_0); not evaluated"
)


class DegenerateSymbolError(ValueError):
    pass


@dataclass(frozen=True)
class RiccatiMatrix:
    S: np.ndarray

    def hamilton_residual(self) -> float:
        """max over basis pairs of |sigma(X, S Y) + sigma(S X, Y)|."""
        return HamiltonMap(self.S).skew_residual()


@dataclass(frozen=True)
class MehlerSymbol:
    n: int
    tau: float
    t: float
    prefactor: complex
    G: np.ndarray
    valid: bool
    det_margin: float
    log_prefactor: complex = 0j
    bracket: tuple[float, float] | None = None
    note: str = ""

    @property
    def S(self) -> np.ndarray:
        return sigma_matrix(self.n) @ self.G

    def exponent(self, X) -> np.ndarray:
        """<G X, X> for points X with trailing axis 2n."""
        X = np.asarray(X)
        return np.einsum("...i,ij,...j->...", X, self.G, X)

    def __call__(self, X) -> np.ndarray:
        if not self.valid:
            raise DegenerateSymbolError(self.note or "invalid symbol")
        return self.prefactor * np.exp(self.exponent(X))


@dataclass(frozen=True)
class MoyalProduct:
    """(q #w p) / p = <quadratic X, X> + scalar for p a Gaussian exponential."""

    quadratic: np.ndarray
    scalar: complex


def _solve_right(A, B):
    """B A^{-1} without forming the inverse."""
    return np.linalg.solve(A.T, B.T).T


def riccati_from_R(R) -> np.ndarray:
    R = np.asarray(R)
    eye = np.eye(R.shape[0])
    return -1j * _solve_right(R + eye, R - eye)


def riccati_matrix(res: Resolvent) -> RiccatiMatrix:
    """S = -i (R - I)(R + I)^{-1}."""
    if res.det_margin < DEGENERACY_THRESHOLD:
        raise DegenerateSymbolError(f"det(R+I) is degenerate at t={res.t} (margin {res.det_margin:.3e})")
    return RiccatiMatrix(riccati_from_R(res.R))


def riccati_left_form(R) -> np.ndarray:
    """-i (R + I)^{-1}(R - I); agrees with :func:`riccati_from_R` wherever defined."""
    R = np.asarray(R)
    eye = np.eye(R.shape[0])
    return -1j * np.linalg.solve(R + eye, R - eye)


def symbol_from_resolvent(res: Resolvent) -> MehlerSymbol:
    if res.h is None:
        raise ValueError("resolvent was integrated without the log-prefactor")
    n = res.n
    if res.t == res.tau:
        return MehlerSymbol(n, res.tau, res.t, 1.0 + 0j, np.zeros((2 * n, 2 * n), dtype=complex), True, 1.0, 0j)
    S = riccati_matrix(res).S
    G = -sigma_matrix(n) @ S
    G = (G + G.T) / 2
    return MehlerSymbol(
        n=n,
        tau=res.tau,
        t=res.t,
        prefactor=complex(np.exp(res.h)),
        G=G,
        valid=True,
        det_margin=res.det_margin,
        log_prefactor=res.h,
    )


def mehler_symbol(family: HamiltonianFamily, tau: float, t: float, rel_tol: float = DEFAULT_REL_TOL) -> MehlerSymbol:
    """Weyl symbol of U(t, tau); flagged invalid past a zero of det(R + I)."""
    try:
        res = integrate_resolvent(family, tau, t, rel_tol)
    except DegeneracyError as exc:
        n = family.n
        return MehlerSymbol(
            n=n,
            tau=tau,
            t=t,
            prefactor=complex("nan+nanj"),
            G=np.full((2 * n, 2 * n), np.nan, dtype=complex),
            valid=False,
            det_margin=0.0,
            log_prefactor=complex("nan+nanj"),
            bracket=tuple(float(b) for b in exc.bracket),
            note=DIRAC_NOTE,
        )
    return symbol_from_resolvent(res)


# -- Moyal product with a quadratic symbol -------------------------------------------


def moyal_quadratic_gaussian(q: QuadraticForm, sym: MehlerSymbol, side: str = "left") -> MoyalProduct:
    """Exact q #w p (left) or p #w q (right) for p = c exp(<G X, X>).

    The expansion stops at second order because q is quadratic:

        left:  Q - i(G s Q - Q s G) + G s Q s G,   scalar (1/2) Tr(s G s Q)
        right: Q + i(G s Q - Q s G) + G s Q s G,   scalar (1/2) Tr(s G s Q)

    with s the symplectic matrix. The first-order (Poisson bracket) term is
    the only one that changes sign with the order of the factors.
    """
    if not sym.valid:
        raise DegenerateSymbolError(sym.note)
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    s = sigma_matrix(q.n)
    Q, G = q.Q, sym.G
    commutator = G @ s @ Q - Q @ s @ G
    second = G @ s @ Q @ s @ G
    sign = -1j if side == "left" else 1j
    quad = Q + sign * commutator + second
    quad = (quad + quad.T) / 2
    scalar = 0.5 * np.trace(s @ G @ s @ Q)
    return MoyalProduct(quad, complex(scalar))


# -- finite-difference checks --------------------------------------------------------


def _default_fd(t, tau):
    return 1e-4 * max(1.0, abs(t - tau))


def _neighbours(family, tau, t, h_fd, rel_tol):
    """R and h at (t +- h_fd, tau) and (t, tau +- h_fd) by composition with short hops."""
    base = integrate_resolvent(family, tau, t, rel_tol)
    R = base.R

    def hop(a, b):
        return integrate_resolvent(family, a, b, rel_tol, with_prefactor=False, check_range=False).R

    R_t = {+1: hop(t, t + h_fd) @ R, -1: hop(t, t - h_fd) @ R}
    R_tau = {+1: R @ hop(tau + h_fd, tau), -1: R @ hop(tau - h_fd, tau)}
    return base, R_t, R_tau


def _shift_h(base: Resolvent, R_new) -> complex:
    """h at a nearby point, continued from base by the principal log of the det ratio."""
    eye = np.eye(R_new.shape[0])
    ratio = np.linalg.det(R_new + eye) / np.linalg.det(base.R + eye)
    return base.h - 0.5 * np.log(ratio)


def riccati_residuals(family, tau, t, h_fd=None, rel_tol: float = FD_REL_TOL) -> tuple[float, float]:
    """Central-difference residuals of the t- and tau-Riccati equations for S(t, tau)."""
    h_fd = _default_fd(t, tau) if h_fd is None else h_fd
    base, R_t, R_tau = _neighbours(family, tau, t, h_fd, rel_tol)
    S = riccati_from_R(base.R)
    Ft = family.hamilton_matrix(t)
    Ftau = family.hamilton_matrix(tau)

    dS_t = (riccati_from_R(R_t[1]) - riccati_from_R(R_t[-1])) / (2 * h_fd)
    rhs_t = Ft - 1j * (S @ Ft - Ft @ S) + S @ Ft @ S
    dS_tau = (riccati_from_R(R_tau[1]) - riccati_from_R(R_tau[-1])) / (2 * h_fd)
    rhs_tau = -Ftau - 1j * (S @ Ftau - Ftau @ S) - S @ Ftau @ S
    return float(np.abs(dS_t - rhs_t).max()), float(np.abs(dS_tau - rhs_tau).max())


def riccati_residual(family, tau, t, h_fd=None, rel_tol: float = FD_REL_TOL) -> float:
    return max(riccati_residuals(family, tau, t, h_fd, rel_tol))


def transport_residual(family, tau, t, h_fd=None, rel_tol: float = FD_REL_TOL) -> tuple[float, float]:
    """Residuals of d/dt p = q_t #w p and d/dtau p = -p #w q_tau on (G, h).

    Each residual is max|dG - quadratic| + |dh - scalar|.
    """
    h_fd = _default_fd(t, tau) if h_fd is None else h_fd
    base, R_t, R_tau = _neighbours(family, tau, t, h_fd, rel_tol)
    sym = symbol_from_resolvent(base)
    s = sigma_matrix(family.n)

    def G_of(R):
        G = -s @ riccati_from_R(R)
        return (G + G.T) / 2

    q_t = QuadraticForm.from_matrix(family.matrix(t))
    q_tau = QuadraticForm.from_matrix(family.matrix(tau))
    left = moyal_quadratic_gaussian(q_t, sym, "left")
    right = moyal_quadratic_gaussian(q_tau, sym, "right")

    dG = (G_of(R_t[1]) - G_of(R_t[-1])) / (2 * h_fd)
    dh = (_shift_h(base, R_t[1]) - _shift_h(base, R_t[-1])) / (2 * h_fd)
    fwd = np.abs(dG - left.quadratic).max() + abs(dh - left.scalar)

    dG = (G_of(R_tau[1]) - G_of(R_tau[-1])) / (2 * h_fd)
    dh = (_shift_h(base, R_tau[1]) - _shift_h(base, R_tau[-1])) / (2 * h_fd)
    bwd = np.abs(dG + right.quadratic).max() + abs(dh + right.scalar)
    return float(fwd), float(bwd)


def prefactor_branch_check(family, tau, t, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Consistency of exp(h) with 2^n det(R + I)^{-1/2}.

    Always checks exp(2h) 2^{-2n} det(R + I) = 1. When det_margin > 0.5 the
    principal square root applies as well, and |exp(h) - 2^n det(R+I)^{-1/2}|
    is included.
    """
    res = integrate_resolvent(family, tau, t, rel_tol)
    n = res.n
    d = res.det_plus_identity
    residual = abs(np.exp(2 * res.h) * d / 4**n - 1.0)
    if res.det_margin > 0.5:
        principal = 2**n / np.sqrt(d)
        residual = max(residual, abs(np.exp(res.h) - principal))
    return float(residual)


# -- autonomous reduction ---------------------------------------------------------


def autonomous_reduction_check(F, t: float, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """Compare S(t, 0), det(R + I) with tan(tF) and det(cos tF) for constant F.

    Returns (||S - tan(tF)||, |2^{-2n} det(R + I) - det(cos tF)|).
    """
    F = np.asarray(F.F if isinstance(F, HamiltonMap) else F, dtype=complex)
    n = F.shape[0] // 2
    cos_tF = cosm(t * F)
    det_cos = np.linalg.det(cos_tF)
    if abs(det_cos) < 1e-8:
        raise DegenerateSymbolError(f"tF has an eigenvalue near pi/2 + k pi (det cos tF = {det_cos:.3e})")
    tan_tF = _solve_right(cos_tF, sinm(t * F))
    fam = constant_family(form_from_hamilton_map(F), T=max(t, 1e-12))
    res = integrate_resolvent(fam, 0.0, t, rel_tol)
    S = riccati_matrix(res).S
    return float(np.linalg.norm(S - tan_tF)), float(abs(res.det_plus_identity / 4**n - det_cos))
