"""The optimization loop shared by all strategies."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..acquisition import AcquisitionContext, optimize_acquisition
from ..baselines import fit_tstr, random_unit, sobol_unit, tstr_predict
from ..ensemble import (
    EnsembleConfig,
    base_model_from_history,
    fit_ensemble,
    single_model_ensemble,
)
from ..gp import FitConfig, GpModel, fit_gp
from ..runstore import RunHistory

logger = logging.getLogger(__name__)

MODEL_FREE = ("random", "sobol")

# independent random streams per run, keyed as [seed, stream, iteration]
_INIT, _FIT, _WEIGHTS, _ACQ, _BASE = range(5)


@dataclass(frozen=True)
class Strategy:
    name: str
    rho: float | None = None

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        text = text.strip()
        if text.startswith("tstr"):
            _, _, rho = text.partition("@")
            return cls("tstr", float(rho) if rho else 0.1)
        if text not in ("gp", "random", "sobol", "rgpe"):
            raise ValueError(f"unknown strategy {text!r}")
        return cls(text)

    def __str__(self):
        return f"tstr@{self.rho:g}" if self.name == "tstr" else self.name

    @property
    def uses_bases(self) -> bool:
        return self.name in ("rgpe", "tstr")


@dataclass(frozen=True)
class RunConfig:
    init: int = 3
    budget: int = 20
    n_loss_samples: int = 256
    dilution_percentile: float = 95.0
    fantasy_count: int = 16
    integrate_fbest: bool = False
    n_pending: int = 0
    n_probes: int = 1000
    n_refine: int = 10
    fit: FitConfig = field(default_factory=FitConfig)

    def ensemble_config(self, fit: FitConfig | None = None) -> EnsembleConfig:
        return EnsembleConfig(self.n_loss_samples, self.dilution_percentile, fit or self.fit)


@dataclass
class IterationRecord:
    iteration: int
    x: list[float]
    y: float
    regret: float | None
    wall_time: float
    weights: list[float] | None = None
    discarded: list[bool] | None = None


@dataclass
class RunTrace:
    strategy: str
    problem: str
    rep: int
    seed: int
    records: list[IterationRecord]
    model_ids: list[str] | None = None

    @property
    def run_id(self) -> str:
        return f"{self.problem}/{self.strategy}/rep{self.rep}"

    @property
    def regrets(self) -> np.ndarray:
        return np.array([r.regret for r in self.records], dtype=float)

    @property
    def ys(self) -> np.ndarray:
        return np.array([r.y for r in self.records])


def _rng(seed, stream, i=0):
    return np.random.default_rng([int(seed), stream, int(i)])


def _fit_seed(seed, i):
    return int(_rng(seed, _FIT, i).integers(2**31))


def fit_base_models(base_runs, fit: FitConfig, seed: int) -> list[GpModel]:
    models = []
    for k, b in enumerate(base_runs):
        if isinstance(b, GpModel):
            models.append(b)
        elif isinstance(b, RunHistory):
            if not b.observations:
                logger.warning("skipping empty base run %r", b.task_id)
                continue
            models.append(base_model_from_history(b, replace(fit, seed=_fit_seed(seed, 10_000 + k))))
        else:
            raise TypeError(f"unsupported base run {type(b).__name__}")
    return models


def run_optimization(problem, strategy, base_runs=(), config: RunConfig = RunConfig(), seed: int = 0,
                     rep: int = 0, base_models: list[GpModel] | None = None) -> RunTrace:
    """Minimize ``problem`` with one strategy; deterministic per seed.

    The first ``config.init`` points come from a scrambled Sobol design
    (continuous spaces) or uniform sampling without replacement (grids).
    Warm-start strategies with no usable base runs behave exactly like the
    plain GP strategy. ``base_models`` lets callers share fitted base GPs
    between strategies.
    """
    strategy = Strategy.parse(strategy) if isinstance(strategy, str) else strategy
    space = problem.space
    is_grid = space.is_grid
    if base_models is None:
        base_models = fit_base_models(base_runs, config.fit, seed) if strategy.uses_bases else []
    base_ids = [getattr(b, "task_id", f"base{k}") for k, b in enumerate(base_runs)
                if not isinstance(b, RunHistory) or b.observations]
    if strategy.uses_bases and not base_models:
        logger.warning("%s without base runs: running as plain GP", strategy)

    init_rng = _rng(seed, _INIT)
    mask = np.zeros(len(space.grid), dtype=bool) if is_grid else None
    sobol_points = None
    if not is_grid:
        sobol_points = sobol_unit(space.d, max(config.budget, config.init), init_rng)

    X_unit: list[np.ndarray] = []
    y: list[float] = []
    records: list[IterationRecord] = []
    pending: list[tuple[np.ndarray, int | None]] = []
    best = np.inf

    def evaluate(u, idx):
        if idx is not None:
            return problem.evaluate_index(idx)
        return float(problem.evaluate(space.from_unit(u)[0]))

    def complete_oldest():
        u, idx = pending.pop(0)
        X_unit.append(u)
        y.append(evaluate(u, idx))

    for i in range(config.budget):
        t0 = time.perf_counter()
        weights = discarded = None
        if i < config.init or strategy.name in MODEL_FREE:
            if is_grid:
                u, idx = random_unit(space, 1, init_rng, mask)
                u, idx = u[0], int(idx[0])
            elif strategy.name == "random" and i >= config.init:
                u, idx = init_rng.random(space.d), None
            else:
                u, idx = sobol_points[i], None
        else:
            while len(pending) > config.n_pending:
                complete_oldest()
            Xo = np.array(X_unit)
            yo = np.array(y)
            fit = replace(config.fit, seed=_fit_seed(seed, i))
            target = fit_gp(Xo, yo, fit)
            predict = None
            if strategy.name == "rgpe" and base_models:
                ens = fit_ensemble(base_models, Xo, yo, config.ensemble_config(fit),
                                   rng=_rng(seed, _WEIGHTS, i), target_model=target)
                weights, discarded = ens.weights.tolist(), ens.discarded.tolist()
            elif strategy.name == "tstr" and base_models:
                tm = fit_tstr(base_models, target, Xo, yo, strategy.rho)
                weights, discarded = tm.weights.tolist(), [False] * len(tm.weights)
                ens = single_model_ensemble(target)
                predict = lambda xs, tm=tm: tstr_predict(tm, xs)  # noqa: E731
            else:
                ens = single_model_ensemble(target)
            pend = np.array([p[0] for p in pending]) if pending and predict is None else None
            ctx = AcquisitionContext(
                ens,
                float(target.y.min()),
                pending=pend if pend is not None else np.zeros((0, space.d)),
                fantasy_count=config.fantasy_count,
                integrate_fbest=config.integrate_fbest and predict is None,
                observed=Xo,
                predict=predict,
            )
            sug = optimize_acquisition(ctx, space, _rng(seed, _ACQ, i), mask, config.n_probes, config.n_refine)
            u, idx = sug.x_unit, sug.index
        if mask is not None:
            mask[idx] = True
        pending.append((np.asarray(u, dtype=float), idx))
        if config.n_pending == 0 or i < config.init:
            complete_oldest()
        records.append(IterationRecord(i + 1, space.from_unit(u)[0].tolist(), np.nan, None,
                                       time.perf_counter() - t0, weights, discarded))
    while pending:
        complete_oldest()

    # records are in selection order; outcomes were appended in completion
    # order, which is the same FIFO order
    for rec, yi in zip(records, y):
        rec.y = yi
        best = min(best, yi)
        if problem.known_min is not None:
            if yi < problem.known_min - 1e-9 * (1 + abs(problem.known_min)):
                raise AssertionError(f"{problem.label}: value {yi} below known minimum {problem.known_min}")
            rec.regret = max(best - problem.known_min, 0.0)
    model_ids = (base_ids + ["target"]) if strategy.uses_bases and base_models else None
    return RunTrace(str(strategy), problem.label, rep, int(seed), records, model_ids)
