"""Expected improvement for (ensembles of) GPs, for minimization.

All quantities are on the standardized prediction scale of the model: the
target's standardized outcomes give ``f_best``, base models predict on their
own standardized scales.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .ensemble import EnsembleModel, ensemble_predict, single_model_ensemble
from .gp import GpModel, condition, predict, sample_mvn

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class NoCandidatesError(RuntimeError):
    """Every grid candidate has already been evaluated."""


def expected_improvement(mean, variance, f_best):
    """Closed-form EI, ``E[max(0, f_best - y)]`` with ``y ~ N(mean, variance)``.

    Zero variance gives zero EI.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    sigma = np.sqrt(np.maximum(variance, 0.0))
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    z = (f_best - mean) / safe
    ei = safe * (z * ndtr(z) + _INV_SQRT_2PI * np.exp(-0.5 * z * z))
    out = np.where(pos, np.maximum(ei, 0.0), 0.0)
    return out if out.ndim else float(out)


@dataclass
class AcquisitionContext:
    """What EI needs besides candidates.

    ``model`` may be a bare :class:`GpModel`, which is wrapped as a one-model
    ensemble. ``observed`` holds the target's unit-cube inputs, used when
    ``integrate_fbest`` is on. ``predict`` can replace the ensemble posterior
    (TST-R does this); such contexts only support sequential EI.
    """

    model: EnsembleModel | GpModel
    f_best: float
    pending: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    fantasy_count: int = 16
    integrate_fbest: bool = False
    observed: np.ndarray | None = None
    predict: object = None
    qmc: bool = True

    def __post_init__(self):
        if isinstance(self.model, GpModel):
            self.model = single_model_ensemble(self.model)
        self.pending = np.asarray(self.pending, dtype=float)
        if self.pending.size == 0:
            self.pending = np.zeros((0, self._d()))
        self.pending = np.atleast_2d(self.pending)
        if len(self.pending) and self.fantasy_count < 1:
            raise ValueError("fantasy_count must be >= 1 with pending points")

    def _d(self):
        if self.model is None:
            return 0
        return self.model.target_model.d

    @property
    def needs_fantasies(self) -> bool:
        return len(self.pending) > 0 or self.integrate_fbest


def ei_over_candidates(ctx: AcquisitionContext, candidates) -> np.ndarray:
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if ctx.predict is not None:
        mean, var = ctx.predict(candidates)
    else:
        mean, var = ensemble_predict(ctx.model, candidates)
    return expected_improvement(mean, var, ctx.f_best)


@dataclass(frozen=True)
class Fantasies:
    """Conditioned ensembles and their incumbents, one per fantasy draw."""

    ensembles: list
    f_bests: np.ndarray

    def ei(self, candidates) -> np.ndarray:
        candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        total = np.zeros(candidates.shape[0])
        for ens, fb in zip(self.ensembles, self.f_bests):
            mean, var = ensemble_predict(ens, candidates)
            total += expected_improvement(mean, var, fb)
        return total / len(self.ensembles)


def qmc_normals(n: int, dim: int, rng) -> np.ndarray:
    """Standard normal draws from a scrambled Sobol sequence, shape (n, dim).

    Every point is marginally uniform on the cube, so coordinates are
    independent normals; the low discrepancy only reduces the variance of
    averages over the n draws.
    """
    sobol = qmc.Sobol(dim, scramble=True, seed=rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = sobol.random(n)
    return ndtri(np.clip(u, 1e-16, 1 - 1e-16))


def draw_fantasies(ctx: AcquisitionContext, rng) -> Fantasies:
    """Sample every weighted model independently at the fantasy points and condition it on its draw.

    Fantasy points are the pending points, plus the observed target inputs
    when ``integrate_fbest`` is set (then the incumbent is itself sampled).
    Weights are kept fixed.
    """
    if ctx.predict is not None:
        raise ValueError("fantasies need an ensemble posterior, not a custom predictor")
    ens = ctx.model
    n_pending = len(ctx.pending)
    if ctx.integrate_fbest:
        if ctx.observed is None or len(ctx.observed) == 0:
            raise ValueError("integrate_fbest needs the observed target inputs")
        pts = np.vstack([ctx.pending, ctx.observed]) if n_pending else np.atleast_2d(ctx.observed)
    else:
        pts = ctx.pending
    F = ctx.fantasy_count
    n_active = int(np.count_nonzero(ens.weights > 0))
    if ctx.qmc:
        normals = qmc_normals(F, n_active * len(pts), rng).reshape(F, n_active, len(pts))
    else:
        normals = rng.standard_normal((F, n_active, len(pts)))
    per_model = []
    combined = np.zeros((F, len(pts)))
    a = 0
    for w, m in zip(ens.weights, ens.models):
        if w <= 0:
            per_model.append(None)
            continue
        mean, cov = predict(m, pts)
        draws = sample_mvn(mean, cov, F, rng, normals[:, a, :])
        a += 1
        per_model.append(draws)
        combined += w * draws

    ensembles, f_bests = [], np.empty(F)
    for s in range(F):
        models = [
            m if draws is None else condition(m, pts, draws[s])
            for m, draws in zip(ens.models, per_model)
        ]
        ensembles.append(ens.with_models(models))
        fb = float(np.min(combined[s, n_pending:])) if ctx.integrate_fbest else ctx.f_best
        if n_pending:
            fb = min(fb, float(np.min(combined[s, :n_pending])))
        f_bests[s] = fb
    return Fantasies(ensembles, f_bests)


def fantasy_ei(ctx: AcquisitionContext, candidates, rng) -> np.ndarray:
    """EI averaged over fantasized outcomes at the pending points."""
    if not ctx.needs_fantasies:
        return ei_over_candidates(ctx, candidates)
    return draw_fantasies(ctx, rng).ei(candidates)


def integrate_fbest(ctx: AcquisitionContext, candidates, rng) -> np.ndarray:
    """EI averaged over the joint uncertainty of the model at observed target points."""
    if ctx.observed is None or len(ctx.observed) == 0:
        raise ValueError("integrate_fbest needs at least one observed target point")
    noisy = AcquisitionContext(
        ctx.model, ctx.f_best, ctx.pending, ctx.fantasy_count, True, ctx.observed, qmc=ctx.qmc
    )
    return draw_fantasies(noisy, rng).ei(candidates)


def acquisition_function(ctx: AcquisitionContext, rng):
    """Deterministic EI callable for ``ctx``; fantasies are drawn once up front."""
    if ctx.needs_fantasies:
        return draw_fantasies(ctx, rng).ei
    return lambda c: ei_over_candidates(ctx, c)


@dataclass(frozen=True)
class Suggestion:
    x_unit: np.ndarray
    value: float
    index: int | None = None


def optimize_acquisition(
    ctx: AcquisitionContext,
    space,
    rng,
    observed_mask: np.ndarray | None = None,
    n_probes: int = 1000,
    n_refine: int = 10,
) -> Suggestion:
    """Maximize EI over ``space``.

    Grid spaces: exact argmax over candidates not flagged in ``observed_mask``
    (first index wins ties). Continuous spaces: best of ``n_probes`` scrambled
    Sobol probes, then L-BFGS-B from the ``n_refine`` best; a refinement only
    replaces the probe winner if strictly better.
    """
    acq = acquisition_function(ctx, rng)
    if space.is_grid:
        cand = space.grid_unit()
        free = np.ones(len(cand), dtype=bool) if observed_mask is None else ~np.asarray(observed_mask)
        if not free.any():
            raise NoCandidatesError("no candidates remain")
        idx = np.flatnonzero(free)
        vals = acq(cand[idx])
        best = int(np.argmax(vals))
        return Suggestion(cand[idx[best]].copy(), float(vals[best]), int(idx[best]))

    d = space.d
    sobol = qmc.Sobol(d, scramble=True, seed=rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        probes = sobol.random(n_probes)
    vals = acq(probes)
    order = np.argsort(-vals, kind="stable")
    best_x, best_v = probes[order[0]].copy(), float(vals[order[0]])

    def neg(u):
        return -float(acq(u[None, :])[0])

    for i in order[:n_refine]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(neg, probes[i], method="L-BFGS-B", bounds=[(0.0, 1.0)] * d)
        x = np.clip(res.x, 0.0, 1.0)
        v = -neg(x)
        if v > best_v:
            best_x, best_v = x, v
    return Suggestion(best_x, best_v)
