"""Experiment driver: seeded Monte-Carlo trials, baselines, result emission.

Trial ``i`` of a run uses seed ``base_seed + i``; all numeric results are
fully determined by (config, seed, solver, opts). Wall-clock timings are
measured, not derived, and are excluded from determinism guarantees.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import channel
from .config import ReflectionTopology, SystemConfig
from .designs import init_sr_design, init_wsr_design, random_phases
from .diagnostics import kkt_residual
from .mr import run_mr_bmm
from .sr import run_sr_bmm
from .wsr import SolverOptions, run_wsr_bmm

WORKER_ENV_VAR = "RIS_SIM_THREADS"


@dataclass(frozen=True)
class TrialSummary:
    seed: int
    objective: float
    iterations: int
    wall_time_ms: float
    solver: str
    error: Optional[str] = None


def _float_repr(x: float) -> str:
    return format(float(x), ".12g")


def random_phase_baseline(config: SystemConfig, channels, seed: int = 0,
                          opts: Optional[SolverOptions] = None):
    """Random fixed phases; the beamformer alone is optimized to convergence."""
    opts = replace(opts or SolverOptions(), freeze_theta=True,
                   acceleration="off")
    topology = config.resolved_topology()
    rng = channel.link_rng(seed, channel.CAT_BASELINE_PHASE)
    alphabet = config.phase_alphabet()
    design = init_wsr_design(config, channels, topology, seed=seed)
    design.thetas = [random_phases(n, rng, alphabet)
                     for n in config.ris_elements]
    out, log = run_wsr_bmm(config, channels, topology, opts, design)
    return out, log.objectives[-1]


def no_ris_baseline(config: SystemConfig, channels, seed: int = 0,
                    opts: Optional[SolverOptions] = None):
    """Reflection paths removed; the beamformer alone is optimized."""
    opts = replace(opts or SolverOptions(), freeze_theta=True,
                   acceleration="off")
    topology = ReflectionTopology.no_ris(config.users)
    design = init_wsr_design(config, channels, topology, seed=seed)
    out, log = run_wsr_bmm(config, channels, topology, opts, design)
    return out, log.objectives[-1]


def run_trial(config: SystemConfig, solver: str, seed: int,
              opts: Optional[SolverOptions] = None):
    """One seeded end-to-end run; returns (design, IterationLog)."""
    opts = opts or SolverOptions()
    channels_set = channel.generate_channels(config, seed)
    if solver == "sr":
        design = init_sr_design(config, channels_set, seed=seed)
        return run_sr_bmm(config, channels_set, opts, design)
    if solver == "wsr":
        topology = config.resolved_topology()
        design = init_wsr_design(config, channels_set, topology, seed=seed)
        return run_wsr_bmm(config, channels_set, topology, opts, design)
    if solver == "mr":
        topology = config.resolved_topology()
        design = init_wsr_design(config, channels_set, topology, seed=seed)
        return run_mr_bmm(config, channels_set, opts, design)
    if solver == "random_phase":
        frozen = replace(opts, freeze_theta=True, acceleration="off")
        topology = config.resolved_topology()
        rng = channel.link_rng(seed, channel.CAT_BASELINE_PHASE)
        design = init_wsr_design(config, channels_set, topology, seed=seed)
        design.thetas = [random_phases(n, rng, config.phase_alphabet())
                         for n in config.ris_elements]
        return run_wsr_bmm(config, channels_set, topology, frozen, design)
    if solver == "no_ris":
        frozen = replace(opts, freeze_theta=True, acceleration="off")
        topology = ReflectionTopology.no_ris(config.users)
        design = init_wsr_design(config, channels_set, topology, seed=seed)
        return run_wsr_bmm(config, channels_set, topology, frozen, design)
    raise ValueError(f"unknown solver: {solver}")


def _worker(args):
    config, solver, seed, opts = args
    try:
        design, log = run_trial(config, solver, seed, opts)
        return TrialSummary(seed=seed, objective=log.objectives[-1],
                            iterations=len(log.objectives) - 1,
                            wall_time_ms=(log.times_ms[-1]
                                          if log.times_ms else 0.0),
                            solver=solver), log
    except Exception as exc:  # recorded, excluded from aggregates
        return TrialSummary(seed=seed, objective=float("nan"), iterations=0,
                            wall_time_ms=0.0, solver=solver,
                            error=f"{type(exc).__name__}: {exc}"), None


def worker_cap(requested: Optional[int] = None) -> int:
    env = os.environ.get(WORKER_ENV_VAR)
    cap = int(env) if env else (requested or 1)
    if requested is not None:
        cap = min(cap, requested)
    return max(1, cap)


def monte_carlo(config: SystemConfig, solver: str, trials: int,
                base_seed: int, opts: Optional[SolverOptions] = None,
                workers: Optional[int] = None):
    """Run ``trials`` seeded trials; aggregate over the successful ones.

    Returns (summaries, logs, aggregates). Failed trials carry an ``error``
    and are excluded from the aggregates; ``aggregates["failed"]`` counts
    them. Results are ordered by trial index regardless of scheduling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = [(config, solver, base_seed + i, opts) for i in range(trials)]
    cap = worker_cap(workers)
    if cap > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=cap) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(job) for job in jobs]
    summaries = [summary for summary, _ in results]
    logs = [log for _, log in results]
    good = [s for s in summaries if s.error is None]
    objectives = np.array([s.objective for s in good])
    times = np.array([s.wall_time_ms for s in good])
    iters = np.array([s.iterations for s in good])
    aggregates = {
        "trials": trials,
        "failed": trials - len(good),
        "objective_mean": float(objectives.mean()) if good else float("nan"),
        "objective_std": float(objectives.std(ddof=1)) if len(good) > 1 else 0.0,
        "iterations_mean": float(iters.mean()) if good else float("nan"),
        "time_ms_mean": float(times.mean()) if good else float("nan"),
    }
    return summaries, logs, aggregates


def render_csv(summaries, logs) -> str:
    """``trial,iter,objective_nats,time_ms`` rows for every logged iteration."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["trial", "iter", "objective_nats", "time_ms"])
    for index, (summary, log) in enumerate(zip(summaries, logs)):
        if log is None:
            continue
        for it, (objective, time_ms) in enumerate(zip(log.objectives,
                                                      log.times_ms)):
            writer.writerow([index, it, _float_repr(objective),
                             _float_repr(time_ms)])
    return buffer.getvalue()


def render_svg(logs, width: int = 640, height: int = 400) -> str:
    """Minimal deterministic line chart of objective versus iteration."""
    traces = [log.objectives for log in logs if log is not None
              and log.objectives]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if traces:
        all_values = [v for trace in traces for v in trace]
        lo, hi = min(all_values), max(all_values)
        span = (hi - lo) or 1.0
        max_len = max(len(t) for t in traces)
        margin = 40
        for trace in traces:
            points = []
            for i, v in enumerate(trace):
                x = margin + (width - 2 * margin) * (
                    i / max(1, max_len - 1))
                y = height - margin - (height - 2 * margin) * ((v - lo) / span)
                points.append(f"{x:.2f},{y:.2f}")
            parts.append('<polyline fill="none" stroke="steelblue" '
                         'stroke-width="1" points="' + " ".join(points)
                         + '"/>')
        parts.append(
            f'<text x="{width / 2:.0f}" y="{height - 8}" '
            'text-anchor="middle" font-size="12">outer iteration</text>')
        parts.append(
            f'<text x="12" y="{height / 2:.0f}" font-size="12" '
            f'transform="rotate(-90 12 {height / 2:.0f})" '
            'text-anchor="middle">objective (nats)</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_results(summaries, logs, csv_path, svg_path=None) -> None:
    """Write the CSV (and optional SVG); deterministic bytes for fixed inputs."""
    try:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(summaries, logs))
    except OSError as exc:
        raise OSError(f"cannot write results CSV to {csv_path}: {exc}")
    if svg_path is not None:
        try:
            with open(svg_path, "w", encoding="utf-8") as fh:
                fh.write(render_svg(logs))
        except OSError as exc:
            raise OSError(f"cannot write SVG chart to {svg_path}: {exc}")


__all__ = [
    "TrialSummary", "random_phase_baseline", "no_ris_baseline", "run_trial",
    "monte_carlo", "emit_results", "render_csv", "render_svg",
    "kkt_residual", "worker_cap",
]
