"""Time-dependent quadratic symbols t -> Q_t with closed-form coefficient tracks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .symplectic import QuadraticForm, sigma_matrix

TERM_KINDS = ("poly", "cos", "sin")
DISSIPATIVE_CHECK_NODES = 256
DISSIPATIVE_CHECK_TOL = 1e-10


class ConfigError(ValueError):
    """Raised for malformed or inconsistent family configurations."""


@dataclass(frozen=True)
class Term:
    kind: str
    coefficient: complex
    p: float  # degree for poly, angular frequency for cos/sin

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ConfigError(f"unknown term kind {self.kind!r}; expected one of {TERM_KINDS}")
        if self.kind == "poly" and (self.p < 0 or self.p != int(self.p)):
            raise ConfigError(f"poly degree must be a non-negative integer, got {self.p}")

    def __call__(self, t: float) -> complex:
        if self.kind == "poly":
            return self.coefficient * t ** int(self.p)
        if self.kind == "cos":
            return self.coefficient * math.cos(self.p * t)
        return self.coefficient * math.sin(self.p * t)

    def derivative(self, t: float) -> complex:
        if self.kind == "poly":
            k = int(self.p)
            return self.coefficient * k * t ** (k - 1) if k else 0j
        if self.kind == "cos":
            return -self.coefficient * self.p * math.sin(self.p * t)
        return self.coefficient * self.p * math.cos(self.p * t)


@dataclass(frozen=True)
class CoefficientTrack:
    terms: tuple[Term, ...] = ()

    def __call__(self, t: float) -> complex:
        return sum((term(t) for term in self.terms), 0j)

    def derivative(self, t: float) -> complex:
        return sum((term.derivative(t) for term in self.terms), 0j)

    @classmethod
    def constant(cls, value: complex) -> "CoefficientTrack":
        return cls((Term("poly", complex(value), 0),))


@dataclass(frozen=True)
class HamiltonianFamily:
    """Upper-triangular coefficient tracks (i, j), 0-based, i <= j < 2n.

    ``sample(t)`` returns the symmetric QuadraticForm Q_t; the symbol is
    q_t(X) = <Q_t X, X>, so an off-diagonal entry (i, j) contributes
    2 Q_ij X_i X_j to q_t.
    """

    n: int
    tracks: Mapping[tuple[int, int], CoefficientTrack]
    T: float
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if not self.T > 0:
            raise ConfigError(f"horizon T must be positive, got {self.T}")
        for i, j in self.tracks:
            if not (0 <= i <= j < 2 * self.n):
                raise ConfigError(f"entry ({i + 1},{j + 1}) outside upper triangle of a {2 * self.n}-square matrix")

    def matrix(self, t: float) -> np.ndarray:
        Q = np.zeros((2 * self.n, 2 * self.n), dtype=complex)
        for (i, j), track in self.tracks.items():
            v = track(t)
            Q[i, j] = v
            Q[j, i] = v
        return Q

    def matrix_derivative(self, t: float) -> np.ndarray:
        dQ = np.zeros((2 * self.n, 2 * self.n), dtype=complex)
        for (i, j), track in self.tracks.items():
            v = track.derivative(t)
            dQ[i, j] = v
            dQ[j, i] = v
        return dQ

    def hamilton_matrix(self, t: float) -> np.ndarray:
        """F_t = sigma Q_t, evaluated without range checks (integrator hot path)."""
        return sigma_matrix(self.n) @ self.matrix(t)

    def sample(self, t: float) -> QuadraticForm:
        return sample(self, t)

    @property
    def is_constant(self) -> bool:
        return all(term.kind == "poly" and term.p == 0 for tr in self.tracks.values() for term in tr.terms)

    @property
    def purely_imaginary(self) -> bool:
        return all(term.coefficient.real == 0 for tr in self.tracks.values() for term in tr.terms)

    def dissipativity_margin(self, nodes: int = DISSIPATIVE_CHECK_NODES) -> float:
        """Largest eigenvalue of Re Q_t over a uniform check grid on [0, T]."""
        worst = -np.inf
        for t in np.linspace(0.0, self.T, nodes):
            ReQ = self.matrix(t).real
            worst = max(worst, np.linalg.eigvalsh(ReQ).max())
        return float(worst)

    def is_dissipative(self, tol: float = DISSIPATIVE_CHECK_TOL) -> bool:
        return self.dissipativity_margin() <= tol


def sample(family: HamiltonianFamily, t: float) -> QuadraticForm:
    if not (0.0 <= t <= family.T):
        raise ValueError(f"t={t} outside [0, T={family.T}]")
    return QuadraticForm.from_matrix(family.matrix(t))


def constant_family(Q, T: float = 1.0, name: str = "constant", params=None) -> HamiltonianFamily:
    Q = np.asarray(Q, dtype=complex)
    if np.linalg.norm(Q - Q.T) > 1e-10 * max(1.0, np.linalg.norm(Q)):
        raise ConfigError("constant family matrix is not symmetric")
    m = Q.shape[0]
    tracks = {
        (i, j): CoefficientTrack.constant(Q[i, j])
        for i in range(m)
        for j in range(i, m)
        if Q[i, j] != 0
    }
    return HamiltonianFamily(n=m // 2, tracks=tracks, T=T, name=name, params=dict(params or {}))


# -- built-ins ---------------------------------------------------------------


def harmonic_oscillator(T: float = 10.0) -> HamiltonianFamily:
    """q = -(x^2 + xi^2); generates exp(-tH), H = -d^2/dx^2 + x^2."""
    return constant_family(-np.eye(2), T=T, name="harmonic_oscillator")


def harmonic_schrodinger(T: float = 10.0) -> HamiltonianFamily:
    """q = -i(x^2 + xi^2); generates exp(-itH)."""
    return constant_family(-1j * np.eye(2), T=T, name="harmonic_schrodinger")


def kfp_matrix(a: float = 1.0) -> np.ndarray:
    """Symbol matrix of minus the Kramers-Fokker-Planck operator with V(x) = a x^2.

    Phase variables are ordered (x, v, xi, eta); the symbol is
    -eta^2 - v^2/4 - i(v xi - 2 a x eta).
    """
    Q = np.zeros((4, 4), dtype=complex)
    Q[3, 3] = -1.0
    Q[1, 1] = -0.25
    Q[1, 2] = Q[2, 1] = -0.5j
    Q[0, 3] = Q[3, 0] = 1j * a
    return Q


def kfp(a: float = 1.0, T: float = 10.0) -> HamiltonianFamily:
    return constant_family(kfp_matrix(a), T=T, name="kfp", params={"a": a})


BUILTINS = {
    "harmonic_oscillator": lambda T, params: harmonic_oscillator(T),
    "harmonic_schrodinger": lambda T, params: harmonic_schrodinger(T),
    "kfp": lambda T, params: kfp(float(params.get("a", 1.0)), T),
}


def random_dissipative_family(seed: int, n: int = 1, T: float = 1.0, strength: float = 1.0) -> HamiltonianFamily:
    """Smooth time-dependent family with Re Q_t <= 0 on all of R.

    Re Q_t = -P0 - P1 (1 + cos(w t)) / 2 with P0, P1 positive semidefinite,
    Im Q_t = B0 + B1 t + B2 sin(v t) with B_k real symmetric.
    """
    rng = np.random.default_rng(seed)
    m = 2 * n

    def psd():
        A = rng.normal(size=(m, m)) * strength / np.sqrt(m)
        return A @ A.T / 2

    def sym():
        A = rng.normal(size=(m, m)) * strength / np.sqrt(m)
        return (A + A.T) / 2

    P0, P1 = psd(), psd()
    B0, B1, B2 = sym(), sym(), sym()
    w, v = rng.uniform(0.5, 3.0, size=2)
    tracks = {}
    for i in range(m):
        for j in range(i, m):
            terms = (
                Term("poly", complex(-P0[i, j] - P1[i, j] / 2, B0[i, j]), 0),
                Term("cos", complex(-P1[i, j] / 2, 0.0), float(w)),
                Term("poly", complex(0.0, B1[i, j]), 1),
                Term("sin", complex(0.0, B2[i, j]), float(v)),
            )
            tracks[(i, j)] = CoefficientTrack(terms)
    return HamiltonianFamily(n=n, tracks=tracks, T=T, name=f"random[{seed}]", params={"seed": seed})


# -- JSON config -------------------------------------------------------------


def family_from_config(config) -> HamiltonianFamily:
    """Build a family from a parsed JSON document (dict) or JSON text.

    Schema::

        {"n": int, "T": float, "builtin": str | null, "params": {...},
         "entries": [{"i": int, "j": int,
                      "terms": [{"kind": "poly"|"cos"|"sin", "re": float, "im": float, "p": float}]}],
         "require_dissipative": bool}

    Entry indices are 1-based with i <= j. Lower-triangle entries are
    rejected rather than mirrored so each coefficient has one source.
    """
    if isinstance(config, (str, bytes)):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(config, Mapping):
        raise ConfigError("config must be a JSON object")

    known = {"n", "T", "builtin", "params", "entries", "require_dissipative"}
    unknown = set(config) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    try:
        T = float(config["T"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("config requires a numeric 'T'") from exc
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}")

    params = config.get("params") or {}
    if not isinstance(params, Mapping):
        raise ConfigError("'params' must be an object")
    builtin = config.get("builtin")
    entries = config.get("entries") or []

    if builtin is not None:
        if builtin not in BUILTINS:
            raise ConfigError(f"unknown builtin {builtin!r}; available: {sorted(BUILTINS)}")
        if entries:
            raise ConfigError("give either 'builtin' or 'entries', not both")
        family = BUILTINS[builtin](T, params)
        if "n" in config and int(config["n"]) != family.n:
            raise ConfigError(f"builtin {builtin!r} has n={family.n}, config says n={config['n']}")
    else:
        n = config.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ConfigError("config requires a positive integer 'n'")
        family = HamiltonianFamily(n=n, tracks=_parse_entries(entries, n), T=T, name="config")

    if config.get("require_dissipative", False):
        margin = family.dissipativity_margin()
        if margin > DISSIPATIVE_CHECK_TOL:
            raise ConfigError(f"family is not dissipative: max eig Re Q_t = {margin:.3e}")
    return family


def _parse_entries(entries, n: int) -> dict:
    if not isinstance(entries, list):
        raise ConfigError("'entries' must be a list")
    tracks = {}
    for k, entry in enumerate(entries):
        try:
            i, j = int(entry["i"]), int(entry["j"])
            raw_terms = entry["terms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"entry {k}: needs integer 'i', 'j' and a 'terms' list") from exc
        if not (1 <= i <= j <= 2 * n):
            raise ConfigError(f"entry {k}: need 1 <= i <= j <= {2 * n}, got ({i},{j})")
        if (i - 1, j - 1) in tracks:
            raise ConfigError(f"entry {k}: duplicate entry ({i},{j})")
        terms = []
        for term in raw_terms:
            try:
                terms.append(
                    Term(
                        kind=term["kind"],
                        coefficient=complex(float(term.get("re", 0.0)), float(term.get("im", 0.0))),
                        p=float(term.get("p", 0.0)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"entry {k}: malformed term {term!r}") from exc
        tracks[(i - 1, j - 1)] = CoefficientTrack(tuple(terms))
    return tracks


def load_family(path) -> HamiltonianFamily:
    text = Path(path).read_text()
    return family_from_config(text)
