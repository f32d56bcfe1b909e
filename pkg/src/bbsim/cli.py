"""Command line: ``bbsim {run,sweep,theory,analyze}``.

Exit codes: 0 success, 1 usage error, 2 runtime or invariant failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import theory
from .config import ConfigError, RunConfig, SweepConfig, parse_config, render_config
from .harness import analyze_command, fmt, run_command, sweep_command
from .model import DEFAULT_C, DEFAULT_K, ModelError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
DEFAULT_ALPHA = math.sqrt(DEFAULT_K / DEFAULT_C)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _cmd_run(args) -> int:
    if args.config:
        cfg = _load(args.config)
        if not isinstance(cfg, RunConfig):
            raise UsageError(f"{args.config} is a sweep config; use 'bbsim sweep'")
    else:
        if args.mode is None:
            raise UsageError("run needs a config file or --mode")
        cfg = RunConfig(mode=args.mode)
    overrides = {
        "mode": args.mode, "N": args.n, "E": args.energy, "collisions": args.collisions,
        "seed": args.seed, "initial": args.initial, "rounding": args.rounding,
        "burn_in": args.burn_in, "output_dir": args.out,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    # round-trip through the parser so flag values get the same validation as files
    cfg = parse_config(render_config(cfg))
    summary = run_command(cfg)
    print(f"wrote {cfg.output_dir}: l={summary['l']} <E0>={summary['mean_E0']} drift={summary['conservation_drift']}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args.config)
    if not isinstance(cfg, SweepConfig):
        raise UsageError(f"{args.config} has no [sweep] section")
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    points, failures = sweep_command(cfg)
    print(f"wrote {cfg.output_dir}: {len(points)} points, {len(failures)} failed cells")
    return EXIT_RUNTIME if failures else EXIT_OK


def _cmd_theory(args) -> int:
    a = args.alpha
    if args.what == "beta":
        print(f"beta={fmt(theory.solve_beta(args.energy, a))}")
    elif args.what == "xi":
        print(f"xi={fmt(theory.xi_theoretical(args.energy, a))}")
    else:
        if args.n is None or args.n < 1:
            raise UsageError("spectrum needs --n N >= 1")
        beta = theory.solve_beta(args.energy, a)
        print(f"# beta={fmt(beta)}")
        print("i,omega,energy")
        for i in range(1, args.n + 1):
            w = a * i
            print(f"{i},{fmt(w)},{fmt(theory.planck_energy(w, beta))}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    fits = analyze_command(args.sweep_csv, args.out, args.alpha)
    print(f"collapse_spread={fits.get('collapse_spread')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bbsim", description="Heavy particle + oscillator ladder black-body simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log one line per snapshot / cell")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="single run -> spectrum.csv, convergence.csv, summary.json, checkpoint.json")
    r.add_argument("config", nargs="?", help="run config file")
    r.add_argument("--mode", choices=("classical", "discrete"))
    r.add_argument("--n", type=int, dest="n", help="number of oscillators")
    r.add_argument("--energy", type=float, help="total energy")
    r.add_argument("--collisions", type=lambda s: int(float(s)))
    r.add_argument("--seed", type=int)
    r.add_argument("--initial", help="particle | oscillator:J | explicit:E0,E1,...")
    r.add_argument("--rounding", choices=("coin", "weighted"))
    r.add_argument("--burn-in", type=int, dest="burn_in")
    r.add_argument("--out", help="output directory")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="grid of runs -> sweep.csv, collapse.csv, fits.json")
    s.add_argument("config")
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)

    t = sub.add_parser("theory", help="Planck reference values")
    t.add_argument("what", choices=("beta", "spectrum", "xi"))
    t.add_argument("--energy", type=float, required=True)
    t.add_argument("--n", type=int)
    t.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    t.set_defaults(func=_cmd_theory)

    a = sub.add_parser("analyze", help="recompute fits.json and collapse.csv from sweep.csv")
    a.add_argument("sweep_csv")
    a.add_argument("--out")
    a.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    a.set_defaults(func=_cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ModelError, theory.TheoryError) as exc:
        print(f"bbsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"bbsim: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
