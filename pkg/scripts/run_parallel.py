#!/usr/bin/env python3
"""Synthetic experiment with evaluations kept in flight.

With ``--pending 2`` each new point is chosen while the two previous ones
are still running, so acquisition integrates over their outcomes with
fantasies. Compares against the sequential setting at equal budget.
"""

import argparse
import dataclasses

from rgpe.bench.driver import RunConfig
from rgpe.bench.experiment import export_results
from rgpe.bench.protocols import run_synthetic


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--pending", type=int, default=2)
    p.add_argument("--fantasies", type=int, default=16)
    p.add_argument("--out", default="results/parallel")
    args = p.parse_args()

    seq = RunConfig()
    par = dataclasses.replace(seq, n_pending=args.pending, fantasy_count=args.fantasies)
    for name, cfg in (("sequential", seq), (f"pending{args.pending}", par)):
        res = run_synthetic(args.reps, ["gp", "rgpe"], config=cfg)
        export_results(res, f"{args.out}/{name}")
        for s, (mean, sem) in res.mean_regret().items():
            print(f"{name:12s} {s:5s} regret@10 {mean[9]:.3f} ({sem[9]:.3f})  final {mean[-1]:.4f}")


if __name__ == "__main__":
    main()
