"""Command-line entry point.

Subcommands: ``study`` (error against the exact benchmark solution over a
grid sequence), ``nonsym`` (error against a fine-grid reference for
particle-list problems), ``lab`` (penalty bound verification sweeps).
Exit codes: 0 success, 2 solver/verification failure, 3 config error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .solve import SolverError
from .study import run_convergence_study, run_nonsymmetric_study, run_penalty_lab

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3


def _add_common(sub):
    sub.add_argument("--config", metavar="PATH", help="experiment config file")
    sub.add_argument("--out", metavar="PATH", help="override the CSV output path")
    sub.add_argument("--seed", type=int, help="override the configured seed")
    sub.add_argument("--threads", type=int, default=1,
                     help="concurrent grid solves (default 1)")


def build_parser():
    parser = argparse.ArgumentParser(prog="bendfem",
                                     description=__doc__.split("\n")[0])
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("study", "nonsym", "lab"):
        _add_common(subs.add_parser(name))
    return parser


def _load_config(args):
    cfg = parse_config(path=args.config)
    if args.out:
        cfg.out_path = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _print_report(report, cfg):
    print(report.to_csv(), end="")
    print(f"wrote {cfg.out_path}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "study":
            report = run_convergence_study(cfg, threads=args.threads)
            _print_report(report, cfg)
        elif args.command == "nonsym":
            report = run_nonsymmetric_study(cfg, threads=args.threads)
            _print_report(report, cfg)
        else:
            summary = run_penalty_lab(cfg)
            for name in ("bound", "perturbed"):
                s = summary[name]
                status = "pass" if s["violations"] == 0 else "FAIL"
                print(f"{name}: {s['feasible']} feasible instances, "
                      f"{s['violations']} violations, {s['skipped']} skipped "
                      f"[{status}]")
            if not summary["ok"]:
                return EXIT_SOLVER
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
