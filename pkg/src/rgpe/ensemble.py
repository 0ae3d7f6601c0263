"""Ranking-weighted GP ensemble.

Each model (the fixed base models from earlier runs plus the target model of
the current run) gets weight equal to the sampled probability that it has the
fewest misranked pairs of target observations. The target model's loss uses
leave-one-out posteriors so it estimates generalization rather than fit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gp import (
    FitConfig,
    GpModel,
    LooUndefinedError,
    fit_gp,
    fit_gp_standardized,
    predict,
    predict_loo,
    sample_joint,
    sample_mvn,
)

logger = logging.getLogger(__name__)


class LossUndefinedError(ValueError):
    """Ranking loss needs at least two target observations."""


@dataclass(frozen=True)
class EnsembleConfig:
    n_loss_samples: int = 256
    dilution_percentile: float = 95.0
    fit: FitConfig = field(default_factory=FitConfig)


def misranked_pairs(f: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Misranking counts for a batch of sampled predictions.

    ``f`` has shape (S, n); ``y`` has shape (n,). Entry s counts ordered pairs
    (j, k) where ``f[s, j] < f[s, k]`` disagrees with ``y[j] < y[k]``. Both
    comparisons are strict, so tied outcomes penalize any strict predicted
    order.
    """
    f = np.atleast_2d(f)
    y = np.asarray(y)
    pred = f[:, :, None] < f[:, None, :]
    obs = y[:, None] < y[None, :]
    return np.count_nonzero(pred ^ obs[None], axis=(1, 2))


def ranking_loss_samples(base: GpModel, X_target, y_target, S: int, rng) -> np.ndarray:
    X_target = np.atleast_2d(X_target)
    y_target = np.asarray(y_target, dtype=float)
    if y_target.size < 2:
        raise LossUndefinedError("ranking loss undefined for fewer than 2 target observations")
    f = sample_joint(base, X_target, S, rng)
    return misranked_pairs(f, y_target)


def loo_misranked_pairs(f_loo: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Leave-one-out misranking counts.

    ``f_loo`` has shape (S, n, n): ``f_loo[s, j]`` is a sample of the model
    without point j evaluated at all n training inputs. Only row j of that
    sample is compared, against ``y[j] < y[k]`` for every k.
    """
    n = len(y)
    idx = np.arange(n)
    own = f_loo[:, idx, idx]  # f_{-j}(x_j), shape (S, n)
    pred = own[:, :, None] < f_loo
    obs = np.asarray(y)[:, None] < np.asarray(y)[None, :]
    return np.count_nonzero(pred ^ obs[None], axis=(1, 2))


def loo_loss_samples(target: GpModel, y_target, S: int, rng) -> np.ndarray:
    """Sampled LOO ranking loss of the target model.

    ``y_target`` may be raw or standardized; only its order matters. Each LOO
    model is sampled jointly at all training inputs, independently across the
    held-out index.
    """
    y_target = np.asarray(y_target, dtype=float)
    if y_target.size < 2:
        raise LossUndefinedError("LOO loss undefined for fewer than 2 target observations")
    try:
        loo = predict_loo(target)
    except LooUndefinedError as exc:
        raise LossUndefinedError(str(exc)) from exc
    n = target.n
    f_loo = np.empty((S, n, n))
    for j in range(n):
        f_loo[:, j, :] = sample_mvn(loo.means[j], loo.covs[j], S, rng)
    return loo_misranked_pairs(f_loo, y_target)


def nearest_rank_percentile(values, p: float) -> float:
    """The ceil(p/100 * n)-th smallest value (1-based), no interpolation."""
    v = np.sort(np.asarray(values))
    k = max(1, math.ceil(p / 100.0 * len(v)))
    return float(v[min(k, len(v)) - 1])


def dilution_mask(losses: np.ndarray, percentile: float = 95.0) -> np.ndarray:
    """True for models to discard: median loss above the target's percentile.

    ``losses`` is (S, t) with the target model in the last column.
    """
    losses = np.asarray(losses)
    threshold = nearest_rank_percentile(losses[:, -1], percentile)
    medians = np.array([nearest_rank_percentile(losses[:, i], 50.0) for i in range(losses.shape[1])])
    discard = medians > threshold
    discard[-1] = False
    return discard


def compute_weights(losses, rng, percentile: float = 95.0) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble weights from an (S, t) loss matrix, target last.

    Models failing the dilution check are dropped first. Each sample then
    votes for its lowest-loss surviving model; a tie including the target goes
    to the target, other ties are broken uniformly at random with ``rng``.
    """
    losses = np.asarray(losses)
    if losses.ndim != 2 or losses.shape[0] < 1 or losses.shape[1] < 1:
        raise ValueError("loss matrix must be (S, t) with S, t >= 1")
    S, t = losses.shape
    discarded = dilution_mask(losses, percentile)
    masked = np.where(discarded[None, :], np.iinfo(np.int64).max, losses.astype(np.int64))
    best = masked.min(axis=1, keepdims=True)
    tied = masked == best
    winners = np.full(S, t - 1)
    open_rows = ~tied[:, -1]
    if open_rows.any():
        noise = rng.random((int(open_rows.sum()), t))
        noise[~tied[open_rows]] = -1.0
        winners[open_rows] = noise.argmax(axis=1)
    weights = np.bincount(winners, minlength=t) / S
    return weights, discarded


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    """Weighted sum of independent GPs; the target model is last."""

    base_models: tuple[GpModel, ...]
    target_model: GpModel
    weights: np.ndarray
    discarded: np.ndarray
    loss_samples: np.ndarray | None = None

    @property
    def models(self) -> tuple[GpModel, ...]:
        return tuple(self.base_models) + (self.target_model,)

    def active(self) -> list[tuple[float, GpModel]]:
        return [(float(w), m) for w, m in zip(self.weights, self.models) if w > 0]

    def with_models(self, models: Sequence[GpModel]) -> "EnsembleModel":
        models = list(models)
        return EnsembleModel(
            tuple(models[:-1]), models[-1], self.weights, self.discarded, self.loss_samples
        )


def single_model_ensemble(model: GpModel) -> EnsembleModel:
    return EnsembleModel((), model, np.ones(1), np.zeros(1, dtype=bool))


def base_model_from_history(history, config: FitConfig = FitConfig()) -> GpModel:
    """Build the fixed GP for a stored run, reusing cached hypers when present."""
    from .runstore import RunHistory  # local: runstore imports gp, not ensemble

    assert isinstance(history, RunHistory)
    X = history.space.to_unit(history.X)
    if history.hypers is not None and history.stats is not None:
        return GpModel.from_hypers(X, history.stats.apply(history.y), history.stats, history.hypers)
    if history.stats is not None:
        return fit_gp_standardized(X, history.stats.apply(history.y), history.stats, config)
    return fit_gp(X, history.y, config)


def base_models_from_histories(histories, config: FitConfig = FitConfig()):
    """Fit each base run once. Returns (models, skipped task ids)."""
    models, skipped = [], []
    for h in histories:
        if len(h.observations) < 1:
            logger.warning("skipping base run %r: no observations", h.task_id)
            skipped.append(h.task_id)
            continue
        models.append(base_model_from_history(h, config))
    return models, skipped


def fit_ensemble(
    base_models: Sequence[GpModel],
    X_target,
    y_target,
    config: EnsembleConfig = EnsembleConfig(),
    rng: np.random.Generator | None = None,
    target_model: GpModel | None = None,
) -> EnsembleModel:
    """Fit the target GP and weight it against the fixed ``base_models``.

    ``base_models`` may also contain :class:`RunHistory` objects, which are
    turned into models on the spot (prefer caching them across iterations).
    With fewer than two target points, or no base models, all weight goes to
    the target.
    """
    rng = np.random.default_rng() if rng is None else rng
    X_target = np.atleast_2d(np.asarray(X_target, dtype=float))
    y_target = np.asarray(y_target, dtype=float)
    if y_target.size < 1:
        raise ValueError("fit_ensemble needs at least one target observation")
    models = []
    for b in base_models:
        if isinstance(b, GpModel):
            models.append(b)
        else:
            ms, _ = base_models_from_histories([b], config.fit)
            models.extend(ms)
    if target_model is None:
        target_model = fit_gp(X_target, y_target, config.fit)
    t = len(models) + 1
    if t == 1 or y_target.size < 2:
        weights = np.zeros(t)
        weights[-1] = 1.0
        return EnsembleModel(tuple(models), target_model, weights, np.zeros(t, dtype=bool))

    S = config.n_loss_samples
    losses = np.empty((S, t), dtype=np.int64)
    for i, m in enumerate(models):
        losses[:, i] = ranking_loss_samples(m, X_target, y_target, S, rng)
    losses[:, -1] = loo_loss_samples(target_model, y_target, S, rng)
    weights, discarded = compute_weights(losses, rng, config.dilution_percentile)
    return EnsembleModel(tuple(models), target_model, weights, discarded, losses)


def ensemble_predict(model: EnsembleModel, xs) -> tuple[np.ndarray, np.ndarray]:
    """Mean sum_i w_i mu_i(x) and variance sum_i w_i^2 var_i(x); zero-weight models are skipped."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    mean = np.zeros(xs.shape[0])
    var = np.zeros(xs.shape[0])
    for w, m in model.active():
        mu, v = predict(m, xs, full_cov=False)
        mean += w * mu
        var += w * w * v
    return mean, var


def ensemble_predict_cov(model: EnsembleModel, xs) -> tuple[np.ndarray, np.ndarray]:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    mean = np.zeros(xs.shape[0])
    cov = np.zeros((xs.shape[0], xs.shape[0]))
    for w, m in model.active():
        mu, c = predict(m, xs)
        mean += w * mu
        cov += w * w * c
    return mean, cov


@dataclass(frozen=True)
class EnsembleSamples:
    """Joint ensemble draws plus the per-model draws they were built from.

    ``per_model[i]`` is ``None`` for zero-weight models (never sampled).
    """

    combined: np.ndarray
    per_model: list


def ensemble_sample_joint(model: EnsembleModel, xs, n_samples: int, rng) -> EnsembleSamples:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    combined = np.zeros((n_samples, xs.shape[0]))
    per_model = []
    for w, m in zip(model.weights, model.models):
        if w <= 0:
            per_model.append(None)
            continue
        draws = sample_joint(m, xs, n_samples, rng)
        per_model.append(draws)
        combined += w * draws
    return EnsembleSamples(combined, per_model)
