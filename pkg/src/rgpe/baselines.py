"""Comparison strategies: TST-R and model-free designs.

Plain single-task GP optimization needs nothing beyond a one-model ensemble,
see :func:`rgpe.ensemble.single_model_ensemble`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .gp import GpModel, predict


def discordant_fraction(pred, y) -> float:
    """Fraction of strictly ordered outcome pairs whose predicted order disagrees.

    Pairs with tied outcomes are left out of both counts. A tie in ``pred``
    on a strictly ordered pair counts as discordant.
    """
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 2:
        raise ValueError("distance undefined for fewer than 2 target observations")
    j, k = np.triu_indices(n, 1)
    strict = y[j] != y[k]
    if not strict.any():
        return 0.0
    j, k = j[strict], k[strict]
    agree = np.sign(pred[j] - pred[k]) == np.sign(y[j] - y[k])
    return float(np.count_nonzero(~agree)) / len(j)


def tstr_distance(base: GpModel, X_target, y_target) -> float:
    mean, _ = predict(base, np.atleast_2d(X_target), full_cov=False)
    return discordant_fraction(mean, y_target)


def tstr_weights(distances: Sequence[float], rho: float) -> np.ndarray:
    """Quadratic-kernel weights; the target model (last entry) sits at distance 0."""
    if not rho > 0:
        raise ValueError("bandwidth must be positive")
    d = np.append(np.asarray(distances, dtype=float), 0.0)
    raw = np.where(d < rho, 0.75 * (1.0 - (d / rho) ** 2), 0.0)
    return raw / raw.sum()


@dataclass(frozen=True, eq=False)
class TstrModel:
    base_models: tuple[GpModel, ...]
    target_model: GpModel
    rho: float
    weights: np.ndarray

    @property
    def models(self):
        return tuple(self.base_models) + (self.target_model,)


def fit_tstr(base_models, target_model: GpModel, X_target, y_target, rho: float) -> TstrModel:
    if len(y_target) >= 2:
        dist = [tstr_distance(m, X_target, y_target) for m in base_models]
    else:
        dist = [np.inf] * len(base_models)
    return TstrModel(tuple(base_models), target_model, rho, tstr_weights(dist, rho))


def tstr_predict(model: TstrModel, xs) -> tuple[np.ndarray, np.ndarray]:
    """Kernel-weighted mean of all models; variance of the target model only."""
    xs = np.atleast_2d(xs)
    mean = np.zeros(xs.shape[0])
    var = None
    for w, m in zip(model.weights, model.models):
        if w <= 0 and m is not model.target_model:
            continue
        mu, v = predict(m, xs, full_cov=False)
        mean += w * mu
        if m is model.target_model:
            var = v
    return mean, var


def sobol_unit(d: int, n: int, seed, scramble: bool = True) -> np.ndarray:
    """First ``n`` points of a (scrambled) Sobol sequence, skipping the first point."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sampler = qmc.Sobol(d, scramble=scramble, seed=seed)
    sampler.fast_forward(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return sampler.random(n)


def sobol_suggest(space, n: int, seed) -> np.ndarray:
    return space.from_unit(sobol_unit(space.d, n, seed))


def random_unit(space, n: int, rng, observed_mask=None) -> tuple[np.ndarray, np.ndarray | None]:
    """Uniform unit-cube points, or grid indices drawn without replacement."""
    if space.is_grid:
        free = np.arange(len(space.grid))
        if observed_mask is not None:
            free = free[~np.asarray(observed_mask)]
        if n > len(free):
            raise ValueError("grid exhausted: not enough unobserved candidates")
        idx = rng.choice(free, size=n, replace=False)
        return space.grid_unit()[idx], idx
    return rng.random((n, space.d)), None


def random_suggest(space, n: int, seed, observed_mask=None) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u, idx = random_unit(space, n, rng, observed_mask)
    if idx is not None:
        return space.grid[idx].copy()
    return space.from_unit(u)
