"""Gaussian kernels of the evolution operators and their action on 1-D grids.

The kernel of the Weyl quantization of p(X) = c exp(<G X, X>) is

    K(x, y) = (2 pi)^{-n} int e^{i (x - y) xi} p((x + y)/2, xi) d xi,

a Gaussian (or, for n = 1 and a purely imaginary xi-block, Fresnel)
integral that is evaluated in closed form.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .parallel import pmap
from .resolvent import Resolvent
from .symbol import DegenerateSymbolError, MehlerSymbol

DISTRIBUTIONAL_TOL = 1e-10
EDGE_TOL = 1e-12
DEFAULT_N = 1024
DEFAULT_HALFWIDTH = 12.0


class DistributionalKernelError(ValueError):
    pass


class EdgeDecayWarning(UserWarning):
    pass


# -- grids ----------------------------------------------------------------------------


def _check_size(N: int) -> None:
    if N < 16 or N & (N - 1):
        raise ValueError(f"grid size must be a power of two >= 16, got {N}")


@dataclass(frozen=True)
class GridParams:
    """Uniform grid x0 + k dx, k = 0..N-1."""

    N: int
    x0: float
    dx: float

    def __post_init__(self):
        _check_size(self.N)
        if not self.dx > 0:
            raise ValueError("dx must be positive")

    @classmethod
    def symmetric(cls, N: int = DEFAULT_N, halfwidth: float = DEFAULT_HALFWIDTH) -> "GridParams":
        """N points on [-halfwidth, halfwidth) so that x = 0 is a node."""
        return cls(N, -halfwidth, 2 * halfwidth / N)

    @classmethod
    def parse(cls, text: str) -> "GridParams":
        parts = text.split(",")
        if len(parts) != 3:
            raise ValueError(f"grid must be 'N,x0,dx', got {text!r}")
        return cls(int(parts[0]), float(parts[1]), float(parts[2]))

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.N)

    @property
    def halfwidth(self) -> float:
        return self.N * self.dx / 2

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.dx)


@dataclass(frozen=True)
class GridFunction:
    """Complex samples on a uniform grid.

    ``synthetic`` marks non-decaying inputs (constants, chirps, grid spikes)
    that only make sense as their restriction to the grid.
    """

    samples: np.ndarray
    x0: float
    dx: float
    synthetic: bool = False

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        _check_size(s.size)
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, f, grid: GridParams, synthetic: bool = False) -> "GridFunction":
        return cls(np.asarray(f(grid.x), dtype=complex), grid.x0, grid.dx, synthetic)

    @property
    def N(self) -> int:
        return self.samples.size

    @property
    def grid(self) -> GridParams:
        return GridParams(self.N, self.x0, self.dx)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.dx))

    def edge_magnitude(self, width: int = 4) -> float:
        s = np.abs(self.samples)
        return float(max(s[:width].max(), s[-width:].max()))

    def with_samples(self, samples, synthetic: bool | None = None) -> "GridFunction":
        return GridFunction(samples, self.x0, self.dx, self.synthetic if synthetic is None else synthetic)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re", "im"])
            for x, v in zip(self.x, self.samples):
                w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"x", "re", "im"}:
            raise ValueError(f"{path}: expected CSV header x,re,im")
        x = np.array([float(r["x"]) for r in rows])
        v = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        if x.size < 2:
            raise ValueError(f"{path}: need at least two samples")
        dx = (x[-1] - x[0]) / (x.size - 1)
        if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0):
            raise ValueError(f"{path}: grid is not uniform")
        return cls(v, float(x[0]), float(dx))


def grid_l2(u, v, dx: float) -> float:
    return float(np.sqrt(np.sum(np.abs(np.asarray(u) - np.asarray(v)) ** 2) * dx))


def spectral_derivative(u: GridFunction) -> GridFunction:
    """D u = -i du/dx by FFT (periodic)."""
    k = u.grid.wavenumbers
    return u.with_samples(np.fft.ifft(k * np.fft.fft(u.samples)))


# -- kernels --------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianKernel:
    """K(x, y) = amplitude * exp(<K z, z>), z = (x, y)."""

    n: int
    amplitude: complex
    K: np.ndarray
    distributional: bool = False
    note: str = ""

    def __call__(self, x, y) -> np.ndarray:
        if self.distributional:
            raise DistributionalKernelError(self.note or "kernel is distributional")
        if self.n != 1:
            z = np.concatenate([np.asarray(x), np.asarray(y)], axis=-1)
            return self.amplitude * np.exp(np.einsum("...i,ij,...j->...", z, self.K, z))
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        K = self.K
        return self.amplitude * np.exp(K[0, 0] * x * x + 2 * K[0, 1] * x * y + K[1, 1] * y * y)


def _distributional_kernel(n, note):
    return GaussianKernel(n, complex("nan+nanj"), np.full((2 * n, 2 * n), np.nan, dtype=complex), True, note)


def kernel_from_symbol(sym: MehlerSymbol) -> GaussianKernel:
    """Complete the square in the xi-integral of the Weyl quantization.

    With A = G_xixi, the integral is pi^{n/2} det(-A)^{-1/2} exp(-B^T A^{-1} B / 4).
    The square root is the product of principal roots of the eigenvalues of
    -A. These lie in the closed right half-plane when Re A <= 0, a region
    containing the t -> tau limit, so this choice is the continuous one.
    """
    if not sym.valid:
        raise DegenerateSymbolError(sym.note or "invalid symbol")
    n = sym.n
    G = sym.G
    Gxx, Gxxi, Gxixi = G[:n, :n], G[:n, n:], G[n:, n:]
    A = Gxixi
    svals = np.linalg.svd(A, compute_uv=False)
    if svals.min() <= DISTRIBUTIONAL_TOL:
        return _distributional_kernel(n, "xi-block of the symbol is singular: kernel is a distribution")
    re_eigs = np.linalg.eigvalsh((A.real + A.real.T) / 2)
    if re_eigs.max() >= -DISTRIBUTIONAL_TOL and n != 1:
        raise NotImplementedError("oscillatory (Fresnel) kernels are only supported for n = 1")
    eye = np.eye(n)
    L_m = np.hstack([eye, eye]) / 2
    L_d = np.hstack([eye, -eye])
    P = 1j * L_d + 2 * Gxxi.T @ L_m
    K = L_m.T @ Gxx @ L_m - 0.25 * P.T @ np.linalg.solve(A, P)
    K = (K + K.T) / 2
    root = np.prod(np.sqrt(np.linalg.eigvals(-A)))
    amplitude = sym.prefactor * (2 * np.pi) ** (-n) * np.pi ** (n / 2) / root
    return GaussianKernel(n, complex(amplitude), K)


def apply_kernel(ker: GaussianKernel, u: GridFunction, block: int = 128) -> GridFunction:
    """Trapezoid-rule quadrature of int K(x, y) u(y) dy on the grid of u."""
    if ker.distributional:
        raise DistributionalKernelError(ker.note or "kernel is distributional")
    if ker.n != 1:
        raise NotImplementedError("grid application is implemented for n = 1")
    edge = u.edge_magnitude()
    if edge > EDGE_TOL:
        warnings.warn(f"input does not decay at the grid edges (max edge magnitude {edge:.3e})", EdgeDecayWarning)
    x = u.x
    w = np.full(u.N, u.dx)
    w[0] = w[-1] = u.dx / 2
    wu = w * u.samples
    K = ker.K

    def rows(start):
        xs = x[start : start + block, None]
        phase = K[0, 0] * xs * xs + 2 * K[0, 1] * xs * x[None, :] + K[1, 1] * x[None, :] ** 2
        return np.exp(phase) @ wu

    out = np.concatenate(pmap(rows, range(0, u.N, block)))
    return u.with_samples(ker.amplitude * out, synthetic=False)


# -- closed-form action on Gaussian exponentials ----------------------------------------


@dataclass(frozen=True)
class GaussianState:
    """u(x) = exp(alpha x^2 + beta x + gamma)."""

    alpha: complex
    beta: complex = 0j
    gamma: complex = 0j

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(self.alpha * x * x + self.beta * x + self.gamma)

    @property
    def decaying(self) -> bool:
        return self.alpha.real < 0

    def on_grid(self, grid: GridParams) -> GridFunction:
        return GridFunction.from_function(self, grid, synthetic=not self.decaying)


@dataclass(frozen=True)
class DiracState:
    """weight * delta(x - center)."""

    center: float
    weight: complex

    def on_grid(self, grid: GridParams) -> GridFunction:
        """Single-node spike of mass ``weight`` at the node nearest to ``center``."""
        k = int(round((self.center - grid.x0) / grid.dx))
        if not 0 <= k < grid.N:
            raise ValueError("Dirac mass lies outside the grid")
        samples = np.zeros(grid.N, dtype=complex)
        samples[k] = self.weight / grid.dx
        return GridFunction(samples, grid.x0, grid.dx, synthetic=True)


def propagate_gaussian(ker: GaussianKernel, state: GaussianState, tol: float = 1e-12) -> GaussianState | DiracState:
    """Exact int K(x, y) exp(alpha y^2 + beta y + gamma) dy for n = 1.

    The input need not decay; when the y-quadratic part of the integrand
    is purely imaginary the integral is a Fresnel integral, and when it
    vanishes altogether the result is a Dirac mass.
    """
    if ker.distributional or ker.n != 1:
        raise ValueError("closed-form propagation needs a non-distributional kernel with n = 1")
    K = ker.K
    a = K[1, 1] + state.alpha
    if a.real > tol:
        raise ValueError("integrand grows in y: the integral diverges")
    if abs(a) > tol:
        alpha = K[0, 0] - K[0, 1] ** 2 / a
        beta = -K[0, 1] * state.beta / a
        gamma = state.gamma - state.beta**2 / (4 * a) + np.log(ker.amplitude * np.sqrt(np.pi / (-a)))
        return GaussianState(complex(alpha), complex(beta), complex(gamma))
    # int exp((2 K01 x + beta) y) dy = 2 pi delta(2 Im K01 x + Im beta) for imaginary coefficients
    if abs(K[0, 1].real) > tol or abs(state.beta.real) > tol or abs(K[0, 1].imag) <= tol:
        raise ValueError("integral does not converge to a Dirac mass")
    slope = 2 * K[0, 1].imag
    center = -state.beta.imag / slope
    weight = ker.amplitude * np.exp(K[0, 0] * center**2 + state.gamma) * 2 * np.pi / abs(slope)
    return DiracState(float(center), complex(weight))


# -- operator identities --------------------------------------------------------------


def egorov_residual(res: Resolvent, ker: GaussianKernel, u: GridFunction, y0: float, eta0: float) -> float:
    """max |L_{R(y0,eta0)} K u - K L_{(y0,eta0)} u| with L_{(a,b)} = a D - b x."""
    if res.n != 1:
        raise ValueError("egorov_residual is implemented for n = 1")
    if np.abs(res.R.imag).max() > 1e-8:
        raise ValueError("Egorov check needs a real resolvent (purely imaginary family)")
    x0, xi0 = (res.R.real @ np.array([y0, eta0], dtype=float)).tolist()

    def L(a, b, v: GridFunction) -> GridFunction:
        return v.with_samples(a * spectral_derivative(v).samples - b * v.x * v.samples)

    Ku = apply_kernel(ker, u)
    lhs = L(x0, xi0, Ku).samples
    rhs = apply_kernel(ker, L(y0, eta0, u)).samples
    return float(np.abs(lhs - rhs).max())


def hermite_functions(N_terms: int, x) -> np.ndarray:
    """phi_0..phi_{N-1} at x via the normalized three-term recurrence."""
    x = np.asarray(x, dtype=float)
    phi = np.empty((N_terms,) + x.shape)
    phi[0] = np.pi**-0.25 * np.exp(-x * x / 2)
    if N_terms > 1:
        phi[1] = np.sqrt(2.0) * x * phi[0]
    for k in range(1, N_terms - 1):
        phi[k + 1] = np.sqrt(2.0 / (k + 1)) * x * phi[k] - np.sqrt(k / (k + 1)) * phi[k - 1]
    return phi


def mehler_closed_form(omega: float, x, y) -> np.ndarray:
    """sum_k phi_k(x) phi_k(y) omega^k for |omega| < 1."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    one_m = 1 - omega**2
    return (np.pi * one_m) ** -0.5 * np.exp(-((1 + omega**2) * (x * x + y * y) - 4 * omega * x * y) / (2 * one_m))


def harmonic_oscillator_kernel(t: float, x, y) -> np.ndarray:
    """Heat kernel of -(x^2 - d^2/dx^2) at time t > 0."""
    s, c = np.sinh(2 * t), np.cosh(2 * t)
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return (2 * np.pi * s) ** -0.5 * np.exp(-((x * x + y * y) * c - 2 * x * y) / (2 * s))


@dataclass(frozen=True)
class HermiteMehlerReport:
    series_vs_closed: float
    closed_vs_kernel: float
    kernel_symmetry: float = field(default=0.0)

    @property
    def max(self) -> float:
        return max(self.series_vs_closed, self.closed_vs_kernel, self.kernel_symmetry)


def hermite_mehler_check(t: float, N_terms: int, grid, sym: MehlerSymbol | None = None) -> float:
    """Truncated Hermite series against the Mehler closed form and the Weyl-route kernel.

    ``grid`` is a GridParams or any 1-D array of nodes, used on both axes.
    ``sym`` is the harmonic-oscillator symbol at time t; it is computed when
    omitted. The identification is K_t = e^{-t} * closed form at omega = e^{-2t}.
    """
    return hermite_mehler_report(t, N_terms, grid, sym).max


def hermite_mehler_report(t: float, N_terms: int, grid, sym: MehlerSymbol | None = None) -> HermiteMehlerReport:
    if t <= 0:
        raise ValueError("t must be positive")
    omega = np.exp(-2 * t)
    if omega**N_terms >= 1e-12:
        raise ValueError(f"N_terms={N_terms} too small: omega^N = {omega**N_terms:.3e}")
    x = grid.x if isinstance(grid, GridParams) else np.asarray(grid, dtype=float)
    phi = hermite_functions(N_terms, x)
    series = np.einsum("k,ki,kj->ij", omega ** np.arange(N_terms), phi, phi)
    X, Y = np.meshgrid(x, x, indexing="ij")
    closed = mehler_closed_form(omega, X, Y)
    if sym is None:
        from .family import harmonic_oscillator
        from .symbol import mehler_symbol

        sym = mehler_symbol(harmonic_oscillator(T=max(10.0, t)), 0.0, t)
    kernel = kernel_from_symbol(sym)(X, Y)
    return HermiteMehlerReport(
        series_vs_closed=float(np.abs(series - closed).max()),
        closed_vs_kernel=float(np.abs(np.exp(-t) * closed - kernel).max()),
        kernel_symmetry=float(np.abs(kernel - kernel.T).max()),
    )
