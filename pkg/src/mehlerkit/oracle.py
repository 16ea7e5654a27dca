"""Brute-force reference solver for du/dt = q_t^w(x, D) u on a 1-D grid.

The Weyl quantization of q = a x^2 + b x xi + c xi^2 is
a x^2 + c D^2 + b (x D + D x) / 2 with D = -i d/dx realized spectrally.
Time stepping is classical fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .family import HamiltonianFamily
from .fio import GridFunction, GridParams
from .symplectic import QuadraticForm

STABILITY_FACTOR = 0.5
GROWTH_LIMIT = 10.0


class InstabilityError(RuntimeError):
    pass


def _coefficients(Q) -> tuple[complex, complex, complex]:
    Q = np.asarray(Q)
    if Q.shape != (2, 2):
        raise ValueError("the PDE oracle is implemented for n = 1")
    return complex(Q[0, 0]), complex(2 * Q[0, 1]), complex(Q[1, 1])


@dataclass(frozen=True)
class WeylOperatorMatrix:
    matrix: np.ndarray
    grid: GridParams

    def hermitian_residual(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def __matmul__(self, u):
        return self.matrix @ u


def assemble_weyl_operator(q: QuadraticForm, grid: GridParams) -> WeylOperatorMatrix:
    """Dense matrix of q^w(x, D) on the grid."""
    a, b, c = _coefficients(q.Q)
    N = grid.N
    k = grid.wavenumbers
    eye = np.eye(N)
    D = np.fft.ifft(k[:, None] * np.fft.fft(eye, axis=0), axis=0)
    D2 = np.fft.ifft((k * k)[:, None] * np.fft.fft(eye, axis=0), axis=0)
    X = np.diag(grid.x)
    M = a * X @ X + c * D2 + b * (X @ D + D @ X) / 2
    return WeylOperatorMatrix(M, grid)


class _SpectralOperator:
    """Matrix-free application of q^w for a fixed grid."""

    def __init__(self, grid: GridParams):
        self.x = grid.x
        self.k = grid.wavenumbers

    def apply(self, Q, u: np.ndarray) -> np.ndarray:
        a, b, c = _coefficients(Q)
        x, k = self.x, self.k
        u_hat = np.fft.fft(u)
        out = a * x * x * u
        if c:
            out = out + c * np.fft.ifft(k * k * u_hat)
        if b:
            Du = np.fft.ifft(k * u_hat)
            DXu = np.fft.ifft(k * np.fft.fft(x * u))
            out = out + b * (x * Du + DXu) / 2
        return out

    def norm_bound(self, Q) -> float:
        a, b, c = _coefficients(Q)
        xm = np.abs(self.x).max()
        km = np.abs(self.k).max()
        return abs(a) * xm**2 + abs(b) * xm * km + abs(c) * km**2


def stable_step_count(family: HamiltonianFamily, grid: GridParams, tau: float, t: float, samples: int = 32) -> int:
    """Smallest step count with dt <= 0.5 / (operator norm bound) over [tau, t]."""
    op = _SpectralOperator(grid)
    ts = np.linspace(tau, t, samples)
    bound = max(op.norm_bound(family.matrix(s)) for s in ts)
    if bound == 0:
        return 1
    return max(1, int(np.ceil(abs(t - tau) * bound / STABILITY_FACTOR)))


def evolve(
    family: HamiltonianFamily,
    u0: GridFunction,
    t: float,
    n_steps: int | None = None,
    *,
    tau: float = 0.0,
    norm_history: bool = False,
):
    """Integrate du/ds = q_s^w u from s = tau to s = t with RK4.

    ``n_steps`` defaults to the smallest stable count; passing fewer raises.
    With ``norm_history`` the grid L2 norm after every step is returned too.
    """
    if family.n != 1:
        raise ValueError("the PDE oracle is implemented for n = 1")
    grid = u0.grid
    needed = stable_step_count(family, grid, tau, t)
    if n_steps is None:
        n_steps = needed
    elif n_steps < needed:
        raise ValueError(f"n_steps={n_steps} violates the RK4 stability bound (need >= {needed})")
    op = _SpectralOperator(grid)
    dt = (t - tau) / n_steps
    u = np.array(u0.samples)
    start = np.linalg.norm(u)
    dissipative = family.is_dissipative()
    norms = [u0.norm()] if norm_history else None
    for j in range(n_steps):
        s = tau + j * dt
        Q0 = family.matrix(s)
        Qh = family.matrix(s + dt / 2)
        Q1 = family.matrix(s + dt)
        k1 = op.apply(Q0, u)
        k2 = op.apply(Qh, u + dt / 2 * k1)
        k3 = op.apply(Qh, u + dt / 2 * k2)
        k4 = op.apply(Q1, u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if dissipative and np.linalg.norm(u) > GROWTH_LIMIT * max(start, 1e-300):
            raise InstabilityError(f"norm grew by more than {GROWTH_LIMIT}x at s={s + dt:.6g}")
        if norms is not None:
            norms.append(float(np.sqrt(np.sum(np.abs(u) ** 2) * grid.dx)))
    out = u0.with_samples(u, synthetic=False)
    return (out, np.array(norms)) if norm_history else out
