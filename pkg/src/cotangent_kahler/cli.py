"""Command line entry point: ``verify``, ``solve-b1`` and ``scan``."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

import numpy as np

from .harness_cli import (
    DEFAULT_TOLERANCES,
    SUITES,
    ConfigError,
    config_from_dict,
    emit_report,
    load_config,
    run_suite,
    scan_feasibility,
    solve_b1_table,
    validate_constraints,
)

DEFAULT_CONFIG = {
    "base": {"n": 2, "c": 2.0},
    "family": {"lambda": {"kind": "polynomial", "coeffs": [1.0]},
               "b1": {"mode": "integral", "C": 0.0, "Ef": 0.0}},
}


def _tol(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    if name not in DEFAULT_TOLERANCES:
        raise argparse.ArgumentTypeError(f"unknown tolerance {name!r}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def _span(text):
    """start:stop:num -> linspace, or a single number."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            return list(np.linspace(float(parts[0]), float(parts[1]), int(parts[2])))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected value or start:stop:num, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cotangent-kahler",
        description="Numerical certification of the Kahler Einstein lifts to the nonzero cotangent bundle.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration (default: Ricci-flat n=2 example)")
    common.add_argument("--seed", type=int, help="override sampling.seed")
    common.add_argument("--samples", type=int, help="override sampling.points")
    common.add_argument("--tol", type=_tol, action="append", default=[], metavar="NAME=VALUE",
                        help="override one tolerance (repeatable)")

    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", action="append", choices=SUITES,
                   help="restrict to a suite (repeatable; default: as configured)")
    v.add_argument("--format", choices=("human", "machine"), default="human")
    v.add_argument("--output", help="write the report here instead of stdout")

    s = sub.add_parser("solve-b1", parents=[common],
                       help="tabulate b1, b1', b1'' and the ODE residual as CSV")
    s.add_argument("--t-min", type=float)
    s.add_argument("--t-max", type=float)
    s.add_argument("--num", type=int)
    s.add_argument("--output")

    sc = sub.add_parser("scan", parents=[common],
                        help="constraint feasibility over a grid of C and Ef")
    sc.add_argument("--C", type=_span, default=[0.0], dest="C_values", metavar="SPAN")
    sc.add_argument("--Ef", type=_span, default=[0.0], dest="Ef_values", metavar="SPAN")
    sc.add_argument("--output")
    return parser


def _config(args):
    cfg = load_config(args.config) if args.config else config_from_dict(DEFAULT_CONFIG)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.samples is not None:
        if args.samples < 0:
            raise ConfigError("--samples must be >= 0")
        changes["points"] = args.samples
    if args.tol:
        changes["tolerances"] = {**cfg.tolerances, **dict(args.tol)}
    if getattr(args, "suite", None):
        changes["suites"] = tuple(s for s in SUITES if s in args.suite)
    if getattr(args, "t_min", None) is not None or getattr(args, "t_max", None) is not None:
        grid = cfg.t_grid()
        lo = args.t_min if args.t_min is not None else grid[0]
        hi = args.t_max if args.t_max is not None else grid[-1]
        if not 0 < lo <= hi:
            raise ConfigError("need 0 < t-min <= t-max")
        changes["t_range"] = (lo, hi)
    if getattr(args, "num", None) is not None:
        changes["t_num"] = args.num
    return replace(cfg, **changes) if changes else cfg


def _open(path):
    return open(path, "w", newline="") if path else sys.stdout


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "verify":
            bad = [r for r in validate_constraints(cfg) if not r["ok"]]
            if bad:
                raise ConfigError("; ".join(r["message"] for r in bad))
            report = run_suite(cfg)
            text = emit_report(report, args.format)
            out = _open(args.output)
            out.write(text)
            if out is not sys.stdout:
                out.close()
            return 0 if report["summary"]["ok"] else 1
        if args.command == "solve-b1":
            rows = solve_b1_table(cfg)
            out = _open(args.output)
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["t", "b1", "b1'", "b1''", "ode_residual"])
            for row in rows:
                w.writerow([repr(float(v)) for v in row])
            if out is not sys.stdout:
                out.close()
            return 0
        rows = scan_feasibility(cfg, args.C_values, args.Ef_values)
        out = _open(args.output)
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["C", "Ef", "feasible", "violating_t", "condition"])
        for C, Ef, ok, t, cond in rows:
            w.writerow([repr(C), repr(Ef), "yes" if ok else "no", "" if t is None else repr(t), cond])
        if out is not sys.stdout:
            out.close()
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
