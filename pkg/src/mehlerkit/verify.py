"""Invariant suites run against a family, aggregated into a pass/fail report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .family import HamiltonianFamily
from .fio import GridFunction, GridParams, apply_kernel, grid_l2, kernel_from_symbol
from .resolvent import (
    adjoint_relation_check,
    compose_check,
    integrate_resolvent,
    inverse_check,
)
from .singular import autonomous_singular_space, principal_angle, time_dependent_singular_space
from .symbol import (
    mehler_symbol,
    prefactor_branch_check,
    riccati_from_R,
    riccati_left_form,
    riccati_residuals,
    transport_residual,
)
from .symplectic import HamiltonMap

RICHARDSON_H = 1e-3
RICHARDSON_BAND = (2.5, 6.5)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def to_json(self) -> dict:
        return {"name": self.name, "value": self.value, "tol": self.tol, "passed": self.passed}


@dataclass
class Suite:
    name: str
    checks: list[Check] = field(default_factory=list)
    skipped: str = ""

    def add(self, name, value, tol):
        self.checks.append(Check(name, float(value), float(tol)))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        out = {"suite": self.name, "passed": self.passed, "checks": [c.to_json() for c in self.checks]}
        if self.skipped:
            out["skipped"] = self.skipped
        return out


@dataclass
class VerifyReport:
    family: str
    suites: list[Suite]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def to_json(self) -> dict:
        return {"family": self.family, "passed": self.passed, "suites": [s.to_json() for s in self.suites]}


def _unit_real(rng, m, k):
    X = rng.normal(size=(k, m))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def richardson_ratio(family, tau, t, h=RICHARDSON_H) -> float:
    """Riccati residual at h divided by the residual at h/2; about 4 for O(h^2)."""
    coarse = max(riccati_residuals(family, tau, t, h))
    fine = max(riccati_residuals(family, tau, t, h / 2))
    return coarse / fine


def symplectic_suite(family, times) -> Suite:
    s = Suite("symplectic_core")
    for t in times:
        F = HamiltonMap(family.hamilton_matrix(t))
        scale = max(1.0, np.abs(F.F).max())
        s.add(f"trace F({t:.3g})", F.trace_residual() / scale, 1e-12)
        s.add(f"sigma-skew F({t:.3g})", F.skew_residual() / scale, 1e-12)
    return s


def resolvent_suite(family, tau, t, seed) -> Suite:
    s = Suite("resolvent_engine")
    res = integrate_resolvent(family, tau, t, with_prefactor=False)
    norm2 = np.linalg.norm(res.R, 2) ** 2
    s.add("symplecticity", res.symplectic_residual() / max(1.0, norm2), 1e-8)
    s.add("det R = 1", res.det_residual(), 1e-8)
    if family.is_dissipative():
        s.add("non-negativity", max(0.0, -res.positivity_min(seed=seed)) / max(1.0, norm2), 1e-9)
    if family.purely_imaginary:
        s.add("real resolvent", np.abs(res.R.imag).max(), 1e-9)
    mid = tau + (t - tau) / 2
    s.add("composition", compose_check(family, t, mid, tau) / max(1.0, norm2), 1e-7)
    s.add("inverse", inverse_check(family, tau, t), 1e-7)
    s.add("adjoint relation", adjoint_relation_check(family, tau, t) / max(1.0, norm2), 1e-6)
    return s


def symbol_suite(family, tau, t, seed) -> Suite:
    s = Suite("mehler_symbol")
    sym = mehler_symbol(family, tau, t)
    if not sym.valid:
        s.skipped = f"det(R+I) vanishes in {sym.bracket}"
        return s
    rng = np.random.default_rng(seed)
    X = _unit_real(rng, 2 * family.n, 200) * rng.uniform(0, 4, size=(200, 1))
    s.add("G symmetric", np.abs(sym.G - sym.G.T).max(), 1e-10)
    if family.is_dissipative():
        s.add("Re exponent <= 0", max(0.0, sym.exponent(X).real.max()), 1e-9)
        bound = np.abs(sym(X)).max() / abs(sym.prefactor) - 1
        s.add("boundedness", max(0.0, bound), 1e-9)
    res = integrate_resolvent(family, tau, t)
    S = riccati_from_R(res.R)
    s.add("right-sided form", np.abs(S - riccati_left_form(res.R)).max(), 1e-10)
    back = integrate_resolvent(family, t, tau, with_prefactor=False)
    s.add("antisymmetry S(t,tau) = -S(tau,t)", np.abs(S + riccati_from_R(back.R)).max(), 1e-9)
    s.add("branch consistency", abs(np.exp(2 * res.h) * res.det_plus_identity / 4**family.n - 1), 1e-8)
    if res.det_margin > 0.5:
        s.add("principal branch", prefactor_branch_check(family, tau, t), 1e-8)
    s.add("Riccati residual", max(riccati_residuals(family, tau, t)), 1e-6)
    ratio = richardson_ratio(family, tau, t)
    lo, hi = RICHARDSON_BAND
    s.add("Richardson ratio off 4", 0.0 if lo <= ratio <= hi else abs(ratio - 4), 0.0)
    fwd, bwd = transport_residual(family, tau, t, h_fd=1e-4)
    s.add("transport (t)", fwd, 1e-5)
    s.add("transport (tau)", bwd, 1e-5)
    return s


def singular_suite(family, t) -> Suite:
    s = Suite("singular_space")
    td = time_dependent_singular_space(family, 0.0, t)
    s.add("refinement stable", 0.0 if td.stable else 1.0, 0.0)
    dims = {time_dependent_singular_space(family, 0.0, t, tol=tol).dim for tol in (1e-10, 1e-6)}
    s.add("tol robustness", 0.0 if dims == {td.dim} else 1.0, 0.0)
    if family.is_constant:
        auto = autonomous_singular_space(family.hamilton_matrix(0.0))
        s.add("autonomous equivalence", principal_angle(auto, td), 1e-6)
    return s


def grid_suite(family, tau, t) -> Suite:
    """Kernel action on a Gaussian: contraction and agreement with the PDE oracle."""
    from .oracle import evolve

    s = Suite("gaussian_fio")
    if family.n != 1:
        s.skipped = "grid checks are implemented for n = 1"
        return s
    sym = mehler_symbol(family, tau, t)
    if not sym.valid:
        s.skipped = f"det(R+I) vanishes in {sym.bracket}"
        return s
    grid = GridParams.symmetric()
    u = GridFunction.from_function(lambda x: np.pi**-0.25 * np.exp(-x * x / 2), grid)
    ker = kernel_from_symbol(sym)
    if ker.distributional:
        s.skipped = "kernel is distributional"
        return s
    out = apply_kernel(ker, u)
    if family.is_dissipative():
        s.add("contraction", max(0.0, out.norm() / u.norm() - 1), 1e-6)
    span = min(t - tau, 0.1)
    ref = evolve(family, u, tau + span, tau=tau)
    short = apply_kernel(kernel_from_symbol(mehler_symbol(family, tau, tau + span)), u)
    s.add("oracle agreement", grid_l2(ref.samples, short.samples, grid.dx), 1e-5)
    return s


def verify_family(family: HamiltonianFamily, tau: float = 0.0, t: float | None = None, seed: int = 0) -> VerifyReport:
    """Run every invariant suite on [tau, t] (t defaults to min(T, 0.5))."""
    t = min(family.T, 0.5) if t is None else t
    times = np.linspace(0.0, family.T, 5)
    suites = [
        symplectic_suite(family, times),
        resolvent_suite(family, tau, t, seed),
        symbol_suite(family, tau, t, seed),
        singular_suite(family, t),
        grid_suite(family, tau, t),
    ]
    return VerifyReport(family.name, suites)

