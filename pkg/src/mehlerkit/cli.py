"""Command-line interface: ``mehlerkit <command> [options]``.

Exit codes: 0 success, 2 configuration or validation error, 3 degeneracy
(det(R + I) = 0 on the requested interval), 4 a verify check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .family import ConfigError, load_family
from .fio import GridFunction, GridParams, apply_kernel, kernel_from_symbol
from .resolvent import DEFAULT_REL_TOL, DegeneracyError, integrate_resolvent
from .singular import DEFAULT_N_TAU, DEFAULT_TOL, time_dependent_singular_space
from .symbol import mehler_symbol, symbol_from_resolvent
from .verify import verify_family
from .wavefront import (
    DEFAULT_ORDER_THRESHOLD,
    DEFAULT_RAYS,
    DEFAULT_WINDOW,
    ConicSet,
    decay_profiles,
    detect_wavefront,
    predict_wavefront,
    write_profiles_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_VERIFY = 0, 2, 3, 4


class DegenerateRun(Exception):
    """Raised by a command after writing its outputs when det(R + I) vanished."""


# -- deterministic JSON ------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if all(c not in text for c in ".en"):
        text += ".0"
    return text


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits and sorted keys.

    Non-finite floats become null. numpy scalars and arrays are accepted.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, np.generic):
        obj = obj.item()
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, complex):
        return dumps({"re": obj.real, "im": obj.imag}, indent, _level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.generic)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def complex_matrix(M) -> dict:
    M = np.asarray(M, dtype=complex)
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


# -- run bookkeeping -----------------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    config: str | None
    parameters: dict
    outputs: list[str] = field(default_factory=list)
    version: str = __version__
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "parameters": self.parameters,
            "outputs": self.outputs,
            "version": self.version,
            "wall_time_seconds": self.wall_time,
        }


class Run:
    def __init__(self, args, command: str):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        params = {
            k: v if v is None or isinstance(v, (bool, int, float, str)) else str(v)
            for k, v in sorted(vars(args).items())
            if k not in ("func", "command", "config", "out")
        }
        self.manifest = RunManifest(command, getattr(args, "config", None), params)
        self.start = time.perf_counter()

    def path(self, name: str) -> Path:
        p = self.out / name
        self.manifest.outputs.append(name)
        return p

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(dumps(obj) + "\n")

    def finish(self) -> None:
        self.manifest.wall_time = time.perf_counter() - self.start
        (self.out / "manifest.json").write_text(dumps(self.manifest.to_json()) + "\n")


def _family(args):
    if not args.config:
        raise ConfigError("--config is required")
    return load_family(args.config)


def _degeneracy_json(exc: DegeneracyError) -> dict:
    return {"error": "degeneracy", "message": str(exc), "bracket": list(exc.bracket)}


# -- commands -----------------------------------------------------------------------


def cmd_resolvent(args, run: Run) -> None:
    family = _family(args)
    try:
        res = integrate_resolvent(family, args.tau, args.t, args.tol)
    except DegeneracyError as exc:
        run.write_json("resolvent.json", _degeneracy_json(exc))
        raise DegenerateRun(exc.bracket) from exc
    with open(run.path("resolvent_R.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        for (i, j), v in np.ndenumerate(res.R):
            w.writerow([i, j, _fmt_float(float(v.real)), _fmt_float(float(v.imag))])
    data = {
        "n": res.n,
        "tau": res.tau,
        "t": res.t,
        "h": complex(res.h),
        "det_margin": res.det_margin,
        "symplectic_residual": res.symplectic_residual(),
        "det_residual": res.det_residual(),
        "stats": {"steps": res.stats.steps, "rejected": res.stats.rejected, "est_error": res.stats.est_error},
    }
    if family.is_dissipative() and args.t >= args.tau:
        data["positivity_min"] = res.positivity_min(seed=args.seed)
    run.write_json("resolvent.json", data)


def _symbol_json(sym) -> dict:
    return {
        "n": sym.n,
        "tau": sym.tau,
        "t": sym.t,
        "valid": sym.valid,
        "prefactor": complex(sym.prefactor) if sym.valid else None,
        "log_prefactor": complex(sym.log_prefactor) if sym.valid else None,
        "G": complex_matrix(sym.G) if sym.valid else None,
        "det_margin": sym.det_margin,
        "bracket": list(sym.bracket) if sym.bracket else None,
        "note": sym.note,
    }


def cmd_symbol(args, run: Run) -> None:
    family = _family(args)
    sym = mehler_symbol(family, args.tau, args.t, args.tol)
    run.write_json("symbol.json", _symbol_json(sym))
    if not sym.valid:
        raise DegenerateRun(sym.bracket)


def cmd_kernel(args, run: Run) -> None:
    family = _family(args)
    sym = mehler_symbol(family, args.tau, args.t, args.tol)
    if not sym.valid:
        run.write_json("kernel.json", {"error": "degeneracy", "bracket": list(sym.bracket)})
        raise DegenerateRun(sym.bracket)
    ker = kernel_from_symbol(sym)
    run.write_json(
        "kernel.json",
        {
            "n": ker.n,
            "amplitude": None if ker.distributional else complex(ker.amplitude),
            "K": None if ker.distributional else complex_matrix(ker.K),
            "distributional": ker.distributional,
            "note": ker.note,
        },
    )


def cmd_propagate(args, run: Run) -> None:
    family = _family(args)
    if args.u0:
        u0 = GridFunction.from_csv(args.u0)
    else:
        grid = args.grid or GridParams.symmetric()
        u0 = GridFunction.from_function(lambda x: np.pi**-0.25 * np.exp(-x * x / 2), grid)
    if args.t == args.tau:
        out = u0
    else:
        try:
            res = integrate_resolvent(family, args.tau, args.t, args.tol)
        except DegeneracyError as exc:
            run.write_json("norms.json", _degeneracy_json(exc))
            raise DegenerateRun(exc.bracket) from exc
        ker = kernel_from_symbol(symbol_from_resolvent(res))
        if ker.distributional:
            raise ConfigError("kernel is distributional at this time; nothing to sample")
        out = apply_kernel(ker, u0)
    out.to_csv(run.path("u_t.csv"))
    n_in, n_out = u0.norm(), out.norm()
    run.write_json(
        "norms.json",
        {"input_norm": n_in, "output_norm": n_out, "ratio": n_out / n_in if n_in else None, "contraction": n_out <= n_in * (1 + 1e-6)},
    )


def cmd_singular_space(args, run: Run) -> None:
    family = _family(args)
    t2 = args.t2 if args.t2 is not None else args.t
    basis = time_dependent_singular_space(family, args.t1, t2, args.n_tau, args.tol_space)
    run.write_json("singular_space.json", basis.to_json())


def cmd_wavefront(args, run: Run) -> None:
    if args.mode == "predict":
        family = _family(args)
        if not args.wf0:
            raise ConfigError("--wf0 is required for prediction")
        wf0 = ConicSet.from_json(Path(args.wf0).read_text())
        wf = predict_wavefront(family, args.t, wf0)
        run.write_json("wavefront.json", wf.to_json())
        return
    if not args.u:
        raise ConfigError("--u is required for detection")
    u = GridFunction.from_csv(args.u)
    if args.synthetic:
        u = u.with_samples(u.samples, synthetic=True)
    profiles = decay_profiles(u, args.r_min, args.r_max, args.rays, args.window)
    wf = detect_wavefront(u, n_rays=args.rays, order_threshold=args.order_threshold, profiles=profiles)
    run.write_json("wavefront.json", wf.to_json())
    write_profiles_csv(profiles, run.path("profiles.csv"))


def cmd_verify(args, run: Run) -> bool:
    family = _family(args)
    report = verify_family(family, tau=args.tau, t=args.t, seed=args.seed)
    run.write_json("verify.json", report.to_json())
    return report.passed


# -- parser -------------------------------------------------------------------------


def _grid(text):
    try:
        return GridParams.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="family config (JSON); builtins: harmonic_oscillator, harmonic_schrodinger, kfp (params.a, default 1, a=0 allowed)")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("--tol", type=float, default=DEFAULT_REL_TOL, help="integrator relative tolerance")

    timed = argparse.ArgumentParser(add_help=False)
    timed.add_argument("--tau", type=float, default=0.0)
    timed.add_argument("--t", type=float, required=True)

    p = argparse.ArgumentParser(prog="mehlerkit", description="Evolution operators of quadratic Hamiltonians via the Mehler formula.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("resolvent", parents=[common, timed], help="integrate R(t, tau) and h(t, tau)")
    sp.set_defaults(func=cmd_resolvent)
    sp = sub.add_parser("symbol", parents=[common, timed], help="Weyl symbol c exp(<GX, X>)")
    sp.set_defaults(func=cmd_symbol)
    sp = sub.add_parser("kernel", parents=[common, timed], help="Gaussian kernel of the evolution operator")
    sp.set_defaults(func=cmd_kernel)
    sp = sub.add_parser("propagate", parents=[common, timed], help="apply the evolution operator to a grid function")
    sp.add_argument("--u0", help="input CSV with header x,re,im (default: ground-state Gaussian on --grid)")
    sp.add_argument("--grid", type=_grid, default=None, help="grid as N,x0,dx for the default input")
    sp.set_defaults(func=cmd_propagate)

    sp = sub.add_parser("singular-space", parents=[common], help="time-dependent singular space S_{t1,t2}")
    sp.add_argument("--t1", type=float, default=0.0)
    sp.add_argument("--t2", type=float, default=None)
    sp.add_argument("--t", type=float, default=None, help="alias for --t2")
    sp.add_argument("--n-tau", type=int, default=DEFAULT_N_TAU)
    sp.add_argument("--tol-space", type=float, default=DEFAULT_TOL, help="null-space threshold")
    sp.set_defaults(func=cmd_singular_space)

    sp = sub.add_parser("wavefront", parents=[common], help="predict or detect Gabor wave fronts (n = 1)")
    sp.add_argument("mode", choices=["predict", "detect"])
    sp.add_argument("--t", type=float, default=0.0)
    sp.add_argument("--wf0", help="initial wave front JSON {angles_radians, angular_tol}")
    sp.add_argument("--u", help="grid function CSV to analyse")
    sp.add_argument("--synthetic", action="store_true", help="input does not decay; analyse its restriction to the grid")
    sp.add_argument("--rays", type=int, default=DEFAULT_RAYS)
    sp.add_argument("--r-min", type=float, default=None)
    sp.add_argument("--r-max", type=float, default=None)
    sp.add_argument("--window", type=float, default=DEFAULT_WINDOW)
    sp.add_argument("--order-threshold", type=float, default=DEFAULT_ORDER_THRESHOLD)
    sp.set_defaults(func=cmd_wavefront)

    sp = sub.add_parser("verify", parents=[common], help="run every invariant suite on a family")
    sp.add_argument("--tau", type=float, default=0.0)
    sp.add_argument("--t", type=float, default=None)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "t", None) is None and args.command == "singular-space" and args.t2 is None:
        parser.error("singular-space needs --t2 (or --t)")
    try:
        run = Run(args, args.command if args.command != "wavefront" else f"wavefront {args.mode}")
        try:
            ok = args.func(args, run)
        finally:
            run.finish()
    except DegenerateRun as exc:
        bracket = exc.args[0]
        print(f"mehlerkit: det(R+I) vanishes in [{bracket[0]:.10g}, {bracket[1]:.10g}]", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"mehlerkit: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "verify" and not ok:
        print("mehlerkit: verification failed", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
