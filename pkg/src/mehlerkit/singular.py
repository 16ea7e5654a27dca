"""Singular spaces as numerical kernel intersections of real matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.chebyshev import chebpts1
from scipy.linalg import subspace_angles

from .family import HamiltonianFamily
from .parallel import pmap
from .resolvent import DEFAULT_REL_TOL, resolvent_path
from .symplectic import HamiltonMap

DEFAULT_TOL = 1e-8
DEFAULT_N_TAU = 16
# singular values below this are zero however small the largest one is
ABSOLUTE_FLOOR = 1e-11
STABILITY_ANGLE = 1e-6


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis (rows of ``basis``) of a real subspace of R^{2n}."""

    n: int
    basis: np.ndarray
    tol_used: float
    singular_values: tuple[float, ...]
    stable: bool = True

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def projection_residual(self, direction) -> float:
        """Distance from a unit direction to the subspace."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        if self.dim == 0:
            return 1.0
        return float(np.linalg.norm(d - self.basis.T @ (self.basis @ d)))

    def contains(self, direction, angular_tol: float) -> bool:
        return self.projection_residual(direction) <= np.sin(angular_tol)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "vectors": self.basis.tolist(),
            "singular_values": list(self.singular_values),
            "tol": self.tol_used,
            "stable": self.stable,
        }


def full_space(n: int, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    return SubspaceBasis(n, np.eye(2 * n), tol, ())


def principal_angle(a: SubspaceBasis, b: SubspaceBasis) -> float:
    """Largest principal angle; pi/2 when the dimensions differ."""
    if a.dim != b.dim:
        return np.pi / 2
    if a.dim == 0:
        return 0.0
    return float(subspace_angles(a.basis.T, b.basis.T).max())


def null_space(M, n: int, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Right null space of the real matrix M by singular-value thresholding.

    A singular value counts as zero when it is below tol * (largest) or below
    an absolute floor, so an all-zero stack yields the full space.
    """
    M = np.asarray(M, dtype=float)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    cutoff = max(tol * (s[0] if s.size else 0.0), ABSOLUTE_FLOOR)
    rank = int(np.sum(s > cutoff))
    basis = Vt[rank:].copy()
    return SubspaceBasis(n, basis, tol, tuple(float(v) for v in s))


def autonomous_singular_space(F, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Intersection of Ker[Re F (Im F)^j], j = 0..2n-1, within R^{2n}.

    Each block is divided by max(1, ||F||)^{j+1} so the blocks are comparable.
    """
    F = np.asarray(F.F if isinstance(F, HamiltonMap) else F, dtype=complex)
    m = F.shape[0]
    scale = max(1.0, np.linalg.norm(F, 2))
    blocks = []
    power = np.eye(m)
    for j in range(m):
        blocks.append(F.real @ power / scale ** (j + 1))
        power = power @ F.imag
    return null_space(np.vstack(blocks), m // 2, tol)


def _td_space(family, t1, t2, n_tau, tol, rel_tol) -> SubspaceBasis:
    nodes = t1 + (t2 - t1) * (chebpts1(n_tau) + 1) / 2
    # R(tau, t2) for tau <= t2: continue one backward trajectory from t2
    Rs = resolvent_path(family, t2, sorted(nodes, reverse=True), rel_tol)
    stack = np.vstack([R.imag for R in Rs])
    return null_space(stack, family.n, tol)


def time_dependent_singular_space(
    family: HamiltonianFamily,
    t1: float,
    t2: float,
    n_tau: int = DEFAULT_N_TAU,
    tol: float = DEFAULT_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
) -> SubspaceBasis:
    """Intersection of Ker Im R(tau, t2) over tau in [t1, t2], within R^{2n}.

    tau runs over n_tau Chebyshev nodes. The computation is repeated with
    2 n_tau nodes and ``stable`` records whether the two answers agree.
    The interval [t, t] gives the full space since Im R(t, t) = 0.
    """
    if not 0 <= t1 <= t2 <= family.T:
        raise ValueError(f"need 0 <= t1 <= t2 <= T={family.T}, got t1={t1}, t2={t2}")
    if n_tau < 8:
        raise ValueError("n_tau must be at least 8")
    if t1 == t2:
        return full_space(family.n, tol)
    coarse, fine = pmap(lambda k: _td_space(family, t1, t2, k, tol, rel_tol), (n_tau, 2 * n_tau))
    stable = principal_angle(coarse, fine) <= STABILITY_ANGLE
    return SubspaceBasis(family.n, coarse.basis, tol, coarse.singular_values, stable)


def smoothing_certificate(family: HamiltonianFamily, t: float, tol: float = DEFAULT_TOL) -> bool:
    """True when S_{0,t} = {0}, i.e. every initial datum is Schwartz at time t."""
    if not 0 < t <= family.T:
        raise ValueError(f"need 0 < t <= T={family.T}")
    return time_dependent_singular_space(family, 0.0, t, tol=tol).dim == 0
