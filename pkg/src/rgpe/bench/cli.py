"""Command line entry point.

    rgpe bench synthetic --strategies gp,sobol,tstr@0.1,tstr@0.9,rgpe --reps 100 --out DIR
    rgpe bench grid --tasks 10 --grid-size 288 --reps 20 --base-sample 50 --out DIR
    rgpe run --space space.json --history runs/ --strategy rgpe --budget 20 --objective mod:func
    rgpe replay --trace DIR/traces.csv
    rgpe export --in DIR --out DIR2
"""

from __future__ import annotations

import argparse
import importlib
import importlib.util
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..gp import fit_gp
from ..runstore import RunHistory, load_runs_with_errors, save_run
from ..space import ParamSpace
from .config import BenchConfig, load_config
from .driver import run_optimization
from .experiment import ExperimentResult, export_results, load_result, traces_from_csv
from .problems import BenchmarkProblem, load_grid_problems
from .protocols import GRID_STRATEGIES, SYNTHETIC_STRATEGIES, run_grid, run_synthetic

logger = logging.getLogger("rgpe")


def _csv_list(text):
    return [s for s in (t.strip() for t in text.split(",")) if s]


def _config(args) -> BenchConfig:
    cfg = load_config(args.config) if args.config else BenchConfig()
    return cfg.updated(
        init=getattr(args, "init", None),
        budget=getattr(args, "budget", None),
        workers=getattr(args, "workers", None),
        n_loss_samples=getattr(args, "loss_samples", None),
        n_pending=getattr(args, "pending", None),
    )


def _progress(done, total):
    if done == total or done % max(1, total // 20) == 0:
        logger.info("%d/%d jobs done", done, total)


def summarize(result: ExperimentResult, iterations=None, out=None) -> None:
    """Print mean regret (SEM) and mean rank per strategy at a few iterations."""
    out = sys.stdout if out is None else out
    regrets, ranks = result.mean_regret(), result.mean_rank()
    n_iter = len(next(iter(ranks.values())))
    its = [i for i in (iterations or (1, 5, 10, 20)) if i <= n_iter] or [n_iter]
    width = max(len(s) for s in result.strategies) + 2
    head = "".join(f"{'it ' + str(i):>22}" for i in its)
    print(f"{'strategy':<{width}}{head}", file=out)
    for s in result.strategies:
        cells = "".join(
            f"{regrets[s][0][i - 1]:9.4f} ({regrets[s][1][i - 1]:.3f}) r{ranks[s][i - 1]:.2f}" for i in its
        )
        print(f"{s:<{width}}{cells}", file=out)


def cmd_bench(args) -> int:
    cfg = _config(args)
    strategies = cfg.expand_strategies(_csv_list(args.strategies))
    if args.suite == "synthetic":
        result = run_synthetic(args.reps, strategies, args.seed, cfg.run_config(), cfg.workers,
                               seeds=cfg.seeds, progress=_progress)
    else:
        problems = load_grid_problems(args.grid_dir) if args.grid_dir else None
        if problems is not None and len(problems) < 2:
            raise SystemExit(f"{args.grid_dir}: need at least two grid tables")
        result = run_grid(args.tasks, args.grid_size, args.reps, args.base_sample, strategies, args.seed,
                          cfg.run_config(), cfg.workers, problems, progress=_progress)
    summarize(result)
    if args.out:
        out = export_results(result, args.out)
        (out / "config.json").write_text(json.dumps(
            {"suite": args.suite, "seed": args.seed, "reps": args.reps, "strategies": strategies,
             **{k: v for k, v in vars(cfg).items()}}, indent=1, default=list) + "\n", encoding="utf-8")
        logger.info("wrote %s", out)
    return 0


def load_objective(spec: str):
    """``module:function`` or ``path/to/file.py:function``."""
    target, _, name = spec.rpartition(":")
    if not target or not name:
        raise SystemExit(f"objective must look like module:function, got {spec!r}")
    if target.endswith(".py"):
        mod_spec = importlib.util.spec_from_file_location(Path(target).stem, target)
        module = importlib.util.module_from_spec(mod_spec)
        mod_spec.loader.exec_module(module)
    else:
        module = importlib.import_module(target)
    return getattr(module, name)


def _stdin_objective(stream_in=None, stream_out=None):
    """Ask for each outcome: print the point as a JSON line, read one number back."""
    stream_in = sys.stdin if stream_in is None else stream_in
    stream_out = sys.stdout if stream_out is None else stream_out

    def evaluate(x):
        print(json.dumps({"x": [float(v) for v in x]}), file=stream_out, flush=True)
        line = stream_in.readline()
        if not line:
            raise SystemExit("stdin closed before all outcomes were supplied")
        return float(line)
    return evaluate


def cmd_run(args) -> int:
    cfg = _config(args)
    space = ParamSpace.from_dict(json.loads(Path(args.space).read_text(encoding="utf-8")))
    bases = []
    if args.history:
        bases, errors = load_runs_with_errors(args.history)
        for e in errors:
            logger.warning("skipped %s: %s", e.path, e.error)
        for b in bases:
            if b.space.d != space.d:
                raise SystemExit(f"base run {b.task_id!r} has {b.space.d} dimensions, space has {space.d}")
    fn = load_objective(args.objective) if args.objective else _stdin_objective()
    problem = BenchmarkProblem(space, lambda x: float(fn(list(map(float, x)))), None, args.task_id)
    trace = run_optimization(problem, args.strategy, bases, cfg.run_config(), args.seed)
    best = min(trace.records, key=lambda r: r.y)
    summary = {"best_x": best.x, "best_y": best.y, "iterations": len(trace.records),
               "model_ids": trace.model_ids,
               "final_weights": trace.records[-1].weights}
    print(json.dumps(summary), file=sys.stderr if not args.objective else sys.stdout)
    if args.out:
        X = np.array([r.x for r in trace.records])
        y = trace.ys
        model = fit_gp(space.to_unit(X), y, cfg.run_config().fit)
        save_run(RunHistory.from_model(args.task_id, space, X, y, model), args.out, overwrite=args.overwrite)
        logger.info("saved run to %s", args.out)
    return 0


def _load_any(path) -> ExperimentResult:
    path = Path(path)
    if path.is_dir():
        return load_result(path) if (path / "result.json").exists() else traces_from_csv(path / "traces.csv")
    if path.suffix == ".json":
        return ExperimentResult.from_dict(json.loads(path.read_text(encoding="utf-8")))
    return traces_from_csv(path)


def cmd_replay(args) -> int:
    result = _load_any(args.trace)
    its = [int(i) for i in _csv_list(args.iterations)] if args.iterations else None
    summarize(result, its)
    if args.out:
        export_results(result, args.out)
    return 0


def cmd_export(args) -> int:
    export_results(_load_any(args.inp), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rgpe", description="Ranking-weighted GP ensembles for warm-started BO")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML file with experiment settings")
        sp.add_argument("--budget", type=int)
        sp.add_argument("--init", type=int)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--loss-samples", type=int, help="loss samples S per model")
        sp.add_argument("--pending", type=int, help="evaluations kept in flight (fantasy EI)")

    bench = sub.add_parser("bench", help="run a benchmark suite")
    suites = bench.add_subparsers(dest="suite", required=True)
    syn = suites.add_parser("synthetic", help="shifted Alpine-1 with five base runs")
    syn.add_argument("--strategies", default=",".join(SYNTHETIC_STRATEGIES))
    syn.add_argument("--reps", type=int, default=100)
    grid = suites.add_parser("grid", help="leave-one-task-out on a family of grid tasks")
    grid.add_argument("--strategies", default=",".join(GRID_STRATEGIES))
    grid.add_argument("--tasks", type=int, default=10)
    grid.add_argument("--grid-size", type=int, default=288)
    grid.add_argument("--reps", type=int, default=20)
    grid.add_argument("--base-sample", type=int, default=50)
    grid.add_argument("--grid-dir", help="directory of grid tables in run-file format")
    for sp in (syn, grid):
        common(sp)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="directory for CSV/JSON results")
        sp.set_defaults(func=cmd_bench)

    run = sub.add_parser("run", help="optimize a user objective, warm-started from stored runs")
    common(run)
    run.add_argument("--space", required=True, help="JSON file with {'dims': [...], 'grid': optional}")
    run.add_argument("--history", help="directory of stored runs to warm-start from")
    run.add_argument("--strategy", default="rgpe")
    run.add_argument("--objective", help="module:function or file.py:function; default asks on stdin")
    run.add_argument("--task-id", default="run")
    run.add_argument("--out", help="save the finished run (with fitted hypers) to this file")
    run.add_argument("--overwrite", action="store_true")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("replay", help="recompute aggregates from stored traces")
    rep.add_argument("--trace", required=True, help="traces.csv, result.json or an output directory")
    rep.add_argument("--iterations", help="comma-separated iterations to show")
    rep.add_argument("--out", help="also re-export CSVs here")
    rep.set_defaults(func=cmd_replay)

    exp = sub.add_parser("export", help="write CSVs from a stored result")
    exp.add_argument("--in", dest="inp", required=True)
    exp.add_argument("--out", required=True)
    exp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
