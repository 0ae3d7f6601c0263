#!/usr/bin/env python3
"""Leave-one-task-out grid experiment at desk scale (10 tasks x 20 repetitions).

Every task is the target once; the other tasks each contribute a base run of
50 random grid points. ``--grid-dir`` replaces the synthetic suite with grid
tables stored in the run-file format (one file per task, every candidate
observed).
"""

import argparse
import logging

from rgpe.bench.config import BenchConfig, load_config
from rgpe.bench.experiment import export_results
from rgpe.bench.problems import load_grid_problems
from rgpe.bench.protocols import GRID_STRATEGIES, run_grid


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--tasks", type=int, default=10)
    p.add_argument("--grid-size", type=int, default=288)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--base-sample", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategies", default=",".join(GRID_STRATEGIES))
    p.add_argument("--grid-dir")
    p.add_argument("--config")
    p.add_argument("--out", default="results/grid")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = load_config(args.config) if args.config else BenchConfig()
    problems = load_grid_problems(args.grid_dir) if args.grid_dir else None
    res = run_grid(args.tasks, args.grid_size, args.reps, args.base_sample,
                   cfg.expand_strategies(args.strategies.split(",")), args.seed,
                   cfg.run_config(), cfg.workers, problems)
    export_results(res, args.out)

    ranks = res.mean_rank()
    for s in sorted(ranks, key=lambda s: ranks[s][-1]):
        r = ranks[s]
        print(f"{s:10s} rank@5 {r[4]:.2f}  rank@10 {r[9]:.2f}  rank@{len(r)} {r[-1]:.2f}")
    if "rgpe" in ranks:
        W = res.weight_array("rgpe", cfg.budget)
        print(f"non-zero RGPE weights at the last iteration: {(W > 0).sum(axis=1).mean():.2f} of {W.shape[1]}")


if __name__ == "__main__":
    main()
