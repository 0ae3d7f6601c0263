"""The two benchmark protocols: shifted Alpine-1 and leave-one-task-out grids."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .driver import RunConfig
from .experiment import ExperimentResult, Job, run_jobs
from .problems import BenchmarkProblem, make_grid_suite, make_synthetic_suite, subsample_history

SYNTHETIC_STRATEGIES = ("gp", "sobol", "tstr@0.1", "tstr@0.9", "rgpe")
GRID_STRATEGIES = ("random", "gp", "tstr@0.1", "tstr@0.9", "rgpe")


def synthetic_jobs(n_reps: int, seed: int = 0, seeds: Sequence[int] | None = None,
                   n_base_points: int = 20) -> list[Job]:
    """One job per repetition; each repetition draws its own 20-point base runs."""
    seeds = list(range(seed, seed + n_reps)) if seeds is None else list(seeds)[:n_reps]
    if len(seeds) < n_reps:
        raise ValueError(f"need {n_reps} seeds, got {len(seeds)}")
    jobs = []
    for r, s in enumerate(seeds):
        suite = make_synthetic_suite([seed, r], n_base_points)
        jobs.append(Job(suite.target, r, int(s), suite.bases))
    return jobs


def grid_jobs(problems: Sequence[BenchmarkProblem], n_reps: int, base_sample: int = 50,
              seed: int = 0) -> list[Job]:
    """Every task is the target once; the other tasks contribute ``base_sample``-point runs."""
    jobs = []
    for p, target in enumerate(problems):
        for r in range(n_reps):
            rng = np.random.default_rng([seed, p, r])
            bases = [subsample_history(q, base_sample, rng) for k, q in enumerate(problems) if k != p]
            jobs.append(Job(target, r, seed * 1_000_000 + 1000 * p + r, bases))
    return jobs


def run_synthetic(n_reps: int = 100, strategies: Sequence[str] = SYNTHETIC_STRATEGIES, seed: int = 0,
                  config: RunConfig = RunConfig(), workers: int = 1, seeds=None,
                  progress=None) -> ExperimentResult:
    return run_jobs(synthetic_jobs(n_reps, seed, seeds), strategies, config, workers, progress)


def run_grid(n_tasks: int = 10, grid_size: int = 288, n_reps: int = 20, base_sample: int = 50,
             strategies: Sequence[str] = GRID_STRATEGIES, seed: int = 0, config: RunConfig = RunConfig(),
             workers: int = 1, problems: Sequence[BenchmarkProblem] | None = None,
             progress=None) -> ExperimentResult:
    if problems is None:
        problems = make_grid_suite(n_tasks, grid_size, seed)
    return run_jobs(grid_jobs(problems, n_reps, base_sample, seed), strategies, config, workers, progress)
