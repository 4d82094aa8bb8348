"""Command line: ``rmtlab <kind> --config FILE``, ``rmtlab oracle CURVE --grid ...``, ``rmtlab verify``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .ensemble import SpecError
from .reference import OracleError, ReferenceCurve
from .runner import KINDS, ConfigError, MomentMismatchError, load_config, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2, 3
log = logging.getLogger("rmtlab")

CURVES = ("semicircle", "sine-kernel", "gap-density", "gap-cdf", "surmise", "surmise-cdf",
          "tw2", "tw2-painleve", "airy", "hermite-kernel")


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            lo, hi, step = (float(x) for x in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            return np.round(np.arange(lo, hi + step / 2, step), 12)
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise ConfigError("grid", f"cannot parse grid {text!r}; use lo:hi:step or a list") from None


def oracle_curve(name: str, grid: np.ndarray, beta: int = 2, n: int = 200, energy: float = 0.0
                 ) -> ReferenceCurve:
    from . import reference as ref
    from .resolvent import density_semicircle

    if name == "semicircle":
        vals = density_semicircle(grid)
    elif name == "sine-kernel":
        vals = ref.sine_kernel(grid)
    elif name in ("gap-density", "gap-cdf"):
        dens, cdf = ref.gap_density_fredholm(alpha_max=max(6.0, float(grid.max())))
        vals = (dens if name == "gap-density" else cdf)(grid)
    elif name == "surmise":
        vals = ref.wigner_surmise(grid, beta)
    elif name == "surmise-cdf":
        vals = ref.wigner_surmise_cdf(grid, beta)
    elif name == "tw2":
        vals = ref.tracy_widom_cdf(grid)
    elif name == "tw2-painleve":
        vals = ref.tracy_widom_painleve(grid)
    elif name == "airy":
        vals = ref.airy_function(grid)
    elif name == "hermite-kernel":
        vals = ref.scaled_kernel(n, energy, 0.0, grid)
    else:
        raise ConfigError("curve", f"unknown curve {name!r}; expected one of {CURVES}")
    return ReferenceCurve(np.asarray(grid, dtype=float), np.atleast_1d(np.asarray(vals, dtype=float)),
                          name, {"beta": beta, "n": n, "E": energy})


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are validation errors, not runtime failures
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rmtlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run a {kind} experiment")
        s.add_argument("--config", required=True, help="key = value file (or JSON)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--plot-data", action="store_true", help="also write gnuplot-ready .dat files")
        s.add_argument("--fresh", action="store_true", help="ignore checkpoints from an interrupted run")
    o = sub.add_parser("oracle", help="dump a reference curve")
    o.add_argument("curve", choices=CURVES)
    o.add_argument("--grid", required=True, help="lo:hi:step or comma-separated values")
    o.add_argument("--beta", type=int, default=2, choices=(1, 2))
    o.add_argument("--n", type=int, default=200, help="matrix size for hermite-kernel")
    o.add_argument("--energy", type=float, default=0.0, help="energy for hermite-kernel")
    o.add_argument("--out", help="CSV path (default: stdout)")
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--only", help="comma-separated criterion numbers")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "oracle":
            try:
                curve = oracle_curve(args.curve, parse_grid(args.grid), args.beta, args.n, args.energy)
            except OracleError as exc:
                raise ConfigError("grid", str(exc)) from None
            curve.to_csv(args.out or sys.stdout)
            return EXIT_OK
        if args.command == "verify":
            from .acceptance import run_all
            only = [int(x) for x in args.only.split(",")] if args.only else None
            results = run_all(only, echo=True)
            return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE
        cfg = load_config(args.config, args.command, args.out)
        if args.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        man = run_experiment(cfg, args.out, args.workers, args.plot_data, resume=not args.fresh)
        print(f"{cfg.kind}: wrote {len(man.files)} files to {Path(args.out or cfg.out or f'rmtlab-{cfg.kind}')}")
        return EXIT_OK
    except (ConfigError, SpecError, MomentMismatchError) as exc:
        print(f"rmtlab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OracleError, RuntimeError, OSError, ValueError, ArithmeticError) as exc:
        print(f"rmtlab: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
