"""Command-line entry point.

Subcommands: partition, solve, bounds, validate, fig2, table1, closedloop.
Each takes a JSON config (--config); omitted fields fall back to documented
defaults.  Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import (ConfigError, CoverageImpossible, EngineUnavailable,
                     Infeasible, IoError, IterationLimit, SolverInfeasible,
                     TimeLimit, Unbounded)
from .harness import (ExperimentConfig, emit, run_closedloop, run_fig2,
                      run_partition_only, run_single_solve, run_table1)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

SOLVER_ERRORS = (Infeasible, Unbounded, IterationLimit, TimeLimit,
                 SolverInfeasible, CoverageImpossible, EngineUnavailable)

FIG2_ROLES = {"N": "x", "mean_violation": "y", "std_violation": "y",
              "K": "series", "delta": "series", "method": "series"}
TABLE1_ROLES = {"K": "x", "LB": "y", "UB": "y", "delta": "series"}
CLOSEDLOOP_ROLES = {"t": "x", "mean_cost": "y", "std_cost": "y",
                    "strategy": "series", "K": "series"}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="partcc",
        description="Partition-based approximation of chance-constrained "
                    "programs, with an application to control of "
                    "piecewise-affine systems.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("partition", "partition the uncertainty domain from samples"),
            ("solve", "solve the tightened surrogate once"),
            ("bounds", "solve both surrogates and report the performance "
                       "interval"),
            ("validate", "solve, then estimate violation by Monte Carlo"),
            ("fig2", "violation-vs-sample-size sweep"),
            ("table1", "performance-bound table over (K, delta)"),
            ("closedloop", "closed-loop partitioning-strategy comparison")]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--output", help="output CSV path (default per "
                                         "subcommand inside output.dir)")
        sp.add_argument("--plot", action="store_true",
                        help="also render a PNG next to the CSV")
        sp.add_argument("--plotdata", action="store_true",
                        help="emit a column-role sidecar with the CSV")
    return p


def _load(args) -> ExperimentConfig:
    if args.config:
        return ExperimentConfig.from_json(args.config)
    return ExperimentConfig.from_dict({})


def _out_path(cfg: ExperimentConfig, args, default_name: str) -> str:
    if args.output:
        return args.output
    out_dir = cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, default_name)


def _emit(rows, path, args, roles) -> None:
    fmt = "plotdata" if args.plotdata else "csv"
    emit(rows, path, fmt=fmt, roles=roles)
    print(f"wrote {path} ({len(rows)} rows)")


def _run(args) -> int:
    cfg = _load(args)
    want_plot = args.plot or cfg["output"]["plot"]
    if args.command == "partition":
        rows = run_partition_only(cfg)
        _emit(rows, _out_path(cfg, args, "partition.csv"), args, {})
    elif args.command in ("solve", "bounds", "validate"):
        result = run_single_solve(
            cfg, with_rp=(args.command == "bounds"),
            with_validation=(args.command == "validate"))
        path = _out_path(cfg, args, f"{args.command}.csv")
        _emit([result], path, args, {})
        if args.command == "validate":
            print(f"estimated violation: {result['violation']:.6f} "
                  f"(risk level {result['epsilon']})")
    elif args.command == "fig2":
        summary, detail = run_fig2(cfg)
        path = _out_path(cfg, args, "fig2.csv")
        _emit(summary, path, args, FIG2_ROLES)
        emit(detail, path.replace(".csv", "_detail.csv"))
        if want_plot:
            from .plotting import plot_fig2
            plot_fig2(summary, path.replace(".csv", ".png"))
    elif args.command == "table1":
        summary, detail = run_table1(cfg)
        path = _out_path(cfg, args, "table1.csv")
        _emit(summary, path, args, TABLE1_ROLES)
        emit(detail, path.replace(".csv", "_detail.csv"))
        if want_plot:
            from .plotting import plot_table1
            plot_table1(summary, path.replace(".csv", ".png"))
    elif args.command == "closedloop":
        summary, detail = run_closedloop(cfg)
        path = _out_path(cfg, args, "closedloop.csv")
        _emit(summary, path, args, CLOSEDLOOP_ROLES)
        emit(detail, path.replace(".csv", "_detail.csv"))
        if want_plot:
            from .plotting import plot_closedloop
            plot_closedloop(summary, path.replace(".csv", ".png"))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, IoError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
