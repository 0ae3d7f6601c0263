"""Replicated experiments, regret/rank aggregation and CSV export."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .driver import IterationRecord, RunConfig, RunTrace, Strategy, fit_base_models, run_optimization
from .problems import BenchmarkProblem

logger = logging.getLogger(__name__)


@dataclass
class Job:
    problem: BenchmarkProblem
    rep: int
    seed: int
    base_runs: list = field(default_factory=list)


@dataclass
class ExperimentResult:
    traces: list[RunTrace]
    strategies: list[str]

    def by_strategy(self, strategy: str) -> list[RunTrace]:
        return [t for t in self.traces if t.strategy == strategy]

    def regret_matrix(self, strategy: str) -> np.ndarray:
        return np.array([t.regrets for t in self.by_strategy(strategy)])

    def mean_regret(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        """Per strategy: (mean simple regret, standard error of the mean) per iteration."""
        out = {}
        for s in self.strategies:
            R = self.regret_matrix(s)
            sem = R.std(axis=0, ddof=1) / np.sqrt(len(R)) if len(R) > 1 else np.zeros(R.shape[1])
            out[s] = (R.mean(axis=0), sem)
        return out

    def mean_rank(self) -> dict[str, np.ndarray]:
        """Rank by simple regret within each (problem, rep, iteration), ties averaged, then average."""
        groups: dict[tuple, dict[str, np.ndarray]] = {}
        for t in self.traces:
            groups.setdefault((t.problem, t.rep), {})[t.strategy] = t.regrets
        sums = {s: 0.0 for s in self.strategies}
        for g in groups.values():
            if set(g) != set(self.strategies):
                raise ValueError("every (problem, rep) needs a trace for every strategy")
            R = np.array([g[s] for s in self.strategies])
            ranks = rankdata(R, method="average", axis=0)
            for k, s in enumerate(self.strategies):
                sums[s] = sums[s] + ranks[k]
        return {s: np.asarray(v) / len(groups) for s, v in sums.items()}

    def weight_array(self, strategy: str = "rgpe", iteration: int | None = None):
        """Weight vectors used to pick ``iteration`` (1-based), one row per run."""
        rows = []
        for t in self.by_strategy(strategy):
            rec = t.records[iteration - 1]
            if rec.weights is not None:
                rows.append(rec.weights)
        return np.array(rows)

    def to_dict(self) -> dict:
        return {"strategies": self.strategies, "traces": [asdict(t) for t in self.traces]}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentResult":
        traces = []
        for t in data["traces"]:
            recs = [IterationRecord(**r) for r in t["records"]]
            traces.append(RunTrace(t["strategy"], t["problem"], t["rep"], t["seed"], recs, t.get("model_ids")))
        return cls(traces, list(data["strategies"]))


def _run_job(job: Job, strategies: Sequence[str], config: RunConfig) -> list[RunTrace]:
    parsed = [Strategy.parse(s) for s in strategies]
    base_models = None
    if any(s.uses_bases for s in parsed) and job.base_runs:
        base_models = fit_base_models(job.base_runs, config.fit, job.seed)
    out = []
    for s in parsed:
        out.append(run_optimization(
            job.problem, s, job.base_runs, config, job.seed, job.rep,
            base_models=base_models if s.uses_bases else [],
        ))
    return out


def run_jobs(jobs: Sequence[Job], strategies: Sequence[str], config: RunConfig = RunConfig(),
             workers: int = 1, progress: Callable[[int, int], None] | None = None) -> ExperimentResult:
    """Run every strategy on every job; each job's base GPs are fit once and shared."""
    strategies = [str(Strategy.parse(s)) for s in strategies]
    traces: list[RunTrace] = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_run_job, j, strategies, config) for j in jobs]
            for k, f in enumerate(futures):
                traces.extend(f.result())
                if progress:
                    progress(k + 1, len(jobs))
    else:
        for k, j in enumerate(jobs):
            traces.extend(_run_job(j, strategies, config))
            if progress:
                progress(k + 1, len(jobs))
    return ExperimentResult(traces, strategies)


def replicate(problems: Sequence[BenchmarkProblem], strategies: Sequence[str], n_reps: int,
              seeds: Sequence[int] | None = None, base_runs=None, config: RunConfig = RunConfig(),
              workers: int = 1) -> ExperimentResult:
    """Cross product of problems, repetitions and strategies.

    ``base_runs`` is either a fixed list or ``f(problem_index, rep) -> list``.
    ``seeds[rep]`` seeds repetition ``rep`` (default: ``rep``).
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    seeds = list(range(n_reps)) if seeds is None else list(seeds)
    jobs = []
    for p, prob in enumerate(problems):
        for r in range(n_reps):
            bases = base_runs(p, r) if callable(base_runs) else list(base_runs or [])
            jobs.append(Job(prob, r, seeds[r], bases))
    return run_jobs(jobs, strategies, config, workers)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def export_results(result: ExperimentResult, directory) -> Path:
    """Write regret.csv, ranks.csv, weights.csv, traces.csv and result.json to ``directory``."""
    if not result.traces:
        raise ValueError("nothing to export")
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    regrets = result.mean_regret()
    _write_csv(out / "regret.csv", ["strategy", "iteration", "mean_regret", "sem"], (
        [s, i + 1, _fmt(m), _fmt(e)]
        for s in result.strategies for i, (m, e) in enumerate(zip(*regrets[s]))
    ))
    ranks = result.mean_rank()
    _write_csv(out / "ranks.csv", ["strategy", "iteration", "mean_rank"], (
        [s, i + 1, _fmt(v)] for s in result.strategies for i, v in enumerate(ranks[s])
    ))

    def weight_rows():
        for t in result.traces:
            for rec in t.records:
                if rec.weights is None:
                    continue
                ids = t.model_ids or [f"model{k}" for k in range(len(rec.weights))]
                for mid, w, dsc in zip(ids, rec.weights, rec.discarded):
                    yield [t.run_id, rec.iteration, mid, _fmt(w), _fmt(bool(dsc))]

    _write_csv(out / "weights.csv", ["run_id", "iteration", "model_id", "weight", "discarded"], weight_rows())
    _write_csv(out / "traces.csv",
               ["run_id", "strategy", "problem", "rep", "seed", "iteration", "x", "y", "regret", "wall_time"],
               ([t.run_id, t.strategy, t.problem, t.rep, t.seed, r.iteration,
                 json.dumps([float(v) for v in r.x]), _fmt(r.y), _fmt(r.regret), _fmt(r.wall_time)]
                for t in result.traces for r in t.records))
    (out / "result.json").write_text(json.dumps(result.to_dict()) + "\n", encoding="utf-8")
    return out


def load_result(directory) -> ExperimentResult:
    return ExperimentResult.from_dict(json.loads((Path(directory) / "result.json").read_text(encoding="utf-8")))


def traces_from_csv(path) -> ExperimentResult:
    """Rebuild traces (and RGPE/TST-R weights, if weights.csv sits next to it) from traces.csv."""
    path = Path(path)
    runs: dict[str, RunTrace] = {}
    strategies: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rid = row["run_id"]
            if rid not in runs:
                runs[rid] = RunTrace(row["strategy"], row["problem"], int(row["rep"]), int(row["seed"]), [])
                if row["strategy"] not in strategies:
                    strategies.append(row["strategy"])
            runs[rid].records.append(IterationRecord(
                int(row["iteration"]), json.loads(row["x"]), float(row["y"]),
                float(row["regret"]) if row["regret"] else None, float(row["wall_time"]),
            ))
    wpath = path.with_name("weights.csv")
    if wpath.exists():
        with open(wpath, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                t = runs.get(row["run_id"])
                if t is None:
                    continue
                rec = t.records[int(row["iteration"]) - 1]
                if rec.weights is None:
                    rec.weights, rec.discarded = [], []
                rec.weights.append(float(row["weight"]))
                rec.discarded.append(row["discarded"] == "true")
                if t.model_ids is None:
                    t.model_ids = []
                if row["model_id"] not in t.model_ids:
                    t.model_ids.append(row["model_id"])
    for t in runs.values():
        t.records.sort(key=lambda r: r.iteration)
    return ExperimentResult(list(runs.values()), strategies)
