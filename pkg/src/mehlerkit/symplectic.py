"""Complex symplectic linear algebra on C^{2n} = {(x, xi)}."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# relative size of the antisymmetric part that is silently dropped
SYMMETRY_TOL = 1e-10
# eigenvalue slack when deciding Re Q <= 0
DISSIPATIVE_TOL = 1e-12


def sigma_matrix(n: int) -> np.ndarray:
    """Return the 2n x 2n matrix [[0, I], [-I, 0]]."""
    s = np.zeros((2 * n, 2 * n))
    s[:n, n:] = np.eye(n)
    s[n:, :n] = -np.eye(n)
    return s


def _as_phase_vector(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.ndim != 1 or X.size == 0 or X.size % 2:
        raise ValueError(f"{name} must be a vector of even length 2n, got shape {X.shape}")
    return X


def symplectic_form(X, Y) -> complex:
    """sigma(X, Y) = <xi, y> - <x, eta>, bilinear in both arguments."""
    X = _as_phase_vector(X, "X")
    Y = _as_phase_vector(Y, "Y")
    if X.size != Y.size:
        raise ValueError(f"dimension mismatch: {X.size} vs {Y.size}")
    n = X.size // 2
    return complex(X[n:] @ Y[:n] - X[:n] @ Y[n:])


@dataclass(frozen=True)
class QuadraticForm:
    """q(X) = <Q X, X> with Q complex symmetric of size 2n.

    Use :meth:`from_matrix` to build one from raw input; it symmetrizes and
    records whether Re Q is negative semidefinite.
    """

    n: int
    Q: np.ndarray
    dissipative: bool

    @classmethod
    def from_matrix(cls, Q, symmetry_tol: float = SYMMETRY_TOL) -> "QuadraticForm":
        Q = np.array(Q, dtype=complex)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] % 2 or Q.shape[0] == 0:
            raise ValueError(f"Q must be square of even size 2n, got shape {Q.shape}")
        scale = max(np.linalg.norm(Q), 1.0)
        asym = np.linalg.norm(Q - Q.T) / 2
        if asym > symmetry_tol * scale:
            raise ValueError(f"Q is not symmetric: antisymmetric part {asym:.3e}")
        Q = (Q + Q.T) / 2
        Q.setflags(write=False)
        return cls(n=Q.shape[0] // 2, Q=Q, dissipative=is_dissipative(Q))

    def __call__(self, X) -> complex:
        return evaluate_form(self, X)

    @property
    def real_part(self) -> np.ndarray:
        return self.Q.real

    def polarized(self, X, Y) -> complex:
        X = _as_phase_vector(X)
        Y = _as_phase_vector(Y)
        return complex(Y @ self.Q @ X)


def is_dissipative(Q, tol: float = DISSIPATIVE_TOL) -> bool:
    ReQ = np.asarray(Q).real
    ReQ = (ReQ + ReQ.T) / 2
    return bool(np.linalg.eigvalsh(ReQ).max() <= tol)


def evaluate_form(q: QuadraticForm, X) -> complex:
    X = _as_phase_vector(X)
    if X.size != 2 * q.n:
        raise ValueError(f"dimension mismatch: form has 2n={2 * q.n}, vector has {X.size}")
    return complex(X @ q.Q @ X)


@dataclass(frozen=True)
class HamiltonMap:
    """The matrix F = sigma Q representing q through sigma(X, F Y)."""

    F: np.ndarray

    @property
    def n(self) -> int:
        return self.F.shape[0] // 2

    def trace_residual(self) -> float:
        return abs(np.trace(self.F))

    def skew_residual(self) -> float:
        """max |sigma(e_j, F e_k) + sigma(F e_j, e_k)| over basis pairs."""
        s = sigma_matrix(self.n)
        # sigma(X, Y) = X^T s^T Y, so the pairing matrix is s^T F + F^T s^T
        M = s.T @ self.F + self.F.T @ s.T
        return float(np.abs(M).max())


def hamilton_map(q: QuadraticForm) -> HamiltonMap:
    F = sigma_matrix(q.n) @ q.Q
    F.setflags(write=False)
    return HamiltonMap(F)


def form_from_hamilton_map(F) -> np.ndarray:
    """Inverse of F = sigma Q: returns the symmetric part of -sigma F."""
    F = np.asarray(F, dtype=complex)
    G = -sigma_matrix(F.shape[0] // 2) @ F
    return (G + G.T) / 2


def symplectic_residual(R) -> float:
    """||R^T sigma R - sigma|| (Frobenius)."""
    R = np.asarray(R)
    s = sigma_matrix(R.shape[0] // 2)
    return float(np.linalg.norm(R.T @ s @ R - s))


def positivity_defect(R, X) -> np.ndarray:
    """i (sigma(conj(RX), RX) - sigma(conj X, X)) for the columns of X.

    The value is real for any complex X; non-negative for a non-negative
    complex symplectic R.
    """
    R = np.asarray(R)
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    if X.shape[0] != R.shape[0]:
        X = X.T
    s = sigma_matrix(R.shape[0] // 2)
    RX = R @ X
    # sigma(A, B) = A^T s^T B columnwise
    before = np.einsum("ik,ij,jk->k", X.conj(), s.T, X)
    after = np.einsum("ik,ij,jk->k", RX.conj(), s.T, RX)
    return (1j * (after - before)).real
