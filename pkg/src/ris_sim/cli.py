"""Command-line entry point for seeded Monte-Carlo simulation runs.

Exit codes: 0 on success, 1 on configuration errors, 2 when any trial
failed (failed trials are excluded from aggregates but recorded).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ConfigError, load_config
from .harness import WORKER_ENV_VAR, emit_results, monte_carlo
from .wsr import SolverOptions


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-sim",
        description="Joint beamforming and RIS phase-shift design via "
                    "block minorization-maximization.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run seeded Monte-Carlo trials")
    run.add_argument("--config", required=True, help="JSON config file")
    run.add_argument("--solver", required=True,
                     choices=["wsr", "mr", "sr", "random-phase", "no-ris"])
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--theta-update", choices=["parallel", "serial"],
                     default="parallel")
    run.add_argument("--w-update", choices=["linesearch", "closed-form"],
                     default="linesearch")
    run.add_argument("--power", choices=["total", "per-antenna"],
                     default="total")
    run.add_argument("--phase-bits", type=int, default=None,
                     help="discrete phase alphabet with 2^b levels")
    run.add_argument("--accel", choices=["off", "squarem"], default="off")
    run.add_argument("--topology", choices=["cascade", "paths"],
                     default="cascade",
                     help="cascade overrides any reflection paths in the "
                          "config; paths uses them as given")
    run.add_argument("--max-iters", type=int, default=1000)
    run.add_argument("--rel-tol", type=float, default=1e-6)
    run.add_argument("--workers", type=int, default=None,
                     help=f"worker processes (capped by ${WORKER_ENV_VAR})")
    run.add_argument("--out", default=None, help="results CSV path")
    run.add_argument("--svg", default=None, help="objective-curve SVG path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.phase_bits is not None:
        config = dataclasses.replace(config, phase_bits=args.phase_bits)
    if args.topology == "cascade":
        config = dataclasses.replace(config, topology=None)
    try:
        config.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    solver = args.solver.replace("-", "_")
    if config.system == "mimo" and solver != "sr":
        print("config error: MIMO configs require --solver sr",
              file=sys.stderr)
        return 1
    if config.system == "miso" and solver == "sr":
        print("config error: --solver sr requires a MIMO config",
              file=sys.stderr)
        return 1

    opts = SolverOptions(
        max_outer_iters=args.max_iters,
        rel_tol=args.rel_tol,
        theta_update=args.theta_update,
        w_update=args.w_update.replace("-", "_"),
        power_model=args.power.replace("-", "_"),
        acceleration=args.accel,
    )
    summaries, logs, aggregates = monte_carlo(
        config, solver, trials=args.trials, base_seed=args.seed, opts=opts,
        workers=args.workers)

    if args.out or args.svg:
        csv_path = args.out or "results.csv"
        try:
            emit_results(summaries, logs, csv_path, args.svg)
        except OSError as exc:
            print(f"output error: {exc}", file=sys.stderr)
            return 1

    print(f"solver={solver} trials={aggregates['trials']} "
          f"failed={aggregates['failed']}")
    print(f"objective mean={aggregates['objective_mean']:.6g} "
          f"std={aggregates['objective_std']:.6g} "
          f"iters={aggregates['iterations_mean']:.6g} "
          f"time_ms={aggregates['time_ms_mean']:.6g}")
    for summary in summaries:
        if summary.error is not None:
            print(f"trial seed={summary.seed} failed: {summary.error}",
                  file=sys.stderr)
    return 2 if aggregates["failed"] else 0


if __name__ == "__main__":
    sys.exit(main())
