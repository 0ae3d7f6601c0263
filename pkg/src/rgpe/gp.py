"""Exact GP regression with an ARD Matern-5/2 kernel on unit-cube inputs.

Outcomes are standardized per task before fitting; every prediction returned
here is on that standardized scale. Hyperparameters are point estimates that
maximize the log marginal likelihood over several random restarts.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

logger = logging.getLogger(__name__)

SQRT5 = math.sqrt(5.0)
JITTER = 1e-6
PSD_TOL = 1e-10


class LooUndefinedError(ValueError):
    """Raised when leave-one-out prediction is requested with fewer than 2 points."""


@dataclass(frozen=True)
class StandardizationStats:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("standardization std must be positive")

    def apply(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.std

    def invert(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean


def standardize(ys: Sequence[float]) -> tuple[np.ndarray, StandardizationStats]:
    """Shift and scale ``ys`` to zero mean and unit sample (n-1) std.

    A single value or an all-equal list only has its mean removed.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        raise ValueError("cannot standardize an empty list")
    mean = float(ys.mean())
    std = float(ys.std(ddof=1)) if ys.size > 1 else 0.0
    if not std > 0 or not np.isfinite(std):
        std = 1.0
    stats = StandardizationStats(mean, std)
    return stats.apply(ys), stats


@dataclass(frozen=True)
class KernelHyperparams:
    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float = JITTER

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if np.any(ls <= 0) or self.signal_variance <= 0 or self.noise_variance < 0:
            raise ValueError("kernel hyperparameters must be positive")

    def __eq__(self, other):
        if not isinstance(other, KernelHyperparams):
            return NotImplemented
        return (
            np.array_equal(self.lengthscales, other.lengthscales)
            and self.signal_variance == other.signal_variance
            and self.noise_variance == other.noise_variance
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "lengthscales": [float(v) for v in self.lengthscales],
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelHyperparams":
        return cls(
            np.asarray(data["lengthscales"], dtype=float),
            float(data["signal_variance"]),
            float(data["noise_variance"]),
        )


def _scaled_sqdist(X1, X2, lengthscales):
    A = np.asarray(X1, dtype=float) / lengthscales
    B = np.asarray(X2, dtype=float) / lengthscales
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def matern52(X1, X2, hypers: KernelHyperparams) -> np.ndarray:
    """Kernel matrix between the rows of ``X1`` and ``X2``."""
    X1 = np.atleast_2d(X1)
    X2 = np.atleast_2d(X2)
    r = np.sqrt(_scaled_sqdist(X1, X2, hypers.lengthscales))
    return hypers.signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r**2) * np.exp(-SQRT5 * r)


def kernel_matern52_ard(x1, x2, hypers: KernelHyperparams) -> float:
    """Kernel value for a single pair of points."""
    return float(matern52(np.reshape(x1, (1, -1)), np.reshape(x2, (1, -1)), hypers)[0, 0])


def psd_repair(cov: np.ndarray, tol: float = PSD_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrize ``cov`` and clamp tiny negative eigenvalues to zero.

    Returns the repaired matrix and a square-root factor ``F`` with
    ``F @ F.T == repaired``. Eigenvalues below ``-tol`` mean the matrix is
    genuinely indefinite and raise.
    """
    cov = 0.5 * (cov + cov.T)
    if cov.shape[0] == 0:
        return cov, cov
    # an exact Cholesky is cheaper and covers the common case
    try:
        L = np.linalg.cholesky(cov)
        return cov, L
    except np.linalg.LinAlgError:
        pass
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -tol:
        raise np.linalg.LinAlgError(f"covariance is not PSD (min eigenvalue {evals.min():.3e})")
    evals = np.clip(evals, 0.0, None)
    F = evecs * np.sqrt(evals)
    return (evecs * evals) @ evecs.T, F


@dataclass(frozen=True)
class FitConfig:
    n_restarts: int = 10
    lengthscale_bounds: tuple[float, float] = (1e-3, 1e3)
    signal_variance_bounds: tuple[float, float] = (0.05, 20.0)
    noise_bounds: tuple[float, float] = (JITTER, 1.0)
    seed: int = 0
    maxiter: int = 200


@dataclass(frozen=True, eq=False)
class GpModel:
    """A fitted GP. Immutable; conditioning or refitting returns a new model.

    ``X`` lives in the unit cube and ``y`` is already standardized with
    ``stats``. ``jitter`` is whatever was added to the diagonal on top of the
    noise variance to get a Cholesky factor.
    """

    X: np.ndarray
    y: np.ndarray
    stats: StandardizationStats
    hypers: KernelHyperparams
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_hypers(cls, X, y_std, stats, hypers, meta=None) -> "GpModel":
        X = np.atleast_2d(np.asarray(X, dtype=float)).copy()
        y = np.asarray(y_std, dtype=float).ravel().copy()
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y lengths differ")
        K = matern52(X, X, hypers)
        L, jitter = _cholesky_with_jitter(K, hypers.noise_variance)
        alpha = linalg.cho_solve((L, True), y) if y.size else y
        for a in (X, y, L, alpha):
            a.setflags(write=False)
        meta = dict(meta or {})
        if jitter > 0:
            meta["extra_jitter"] = jitter
        return cls(X, y, stats, hypers, L, alpha, jitter, meta)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def noise_diag(self) -> float:
        return self.hypers.noise_variance + self.jitter


def _cholesky_with_jitter(K, noise):
    n = K.shape[0]
    extra = 0.0
    for _ in range(10):
        try:
            L = np.linalg.cholesky(K + (noise + extra) * np.eye(n))
            return L, extra
        except np.linalg.LinAlgError:
            extra = JITTER if extra == 0.0 else extra * 10.0
    raise np.linalg.LinAlgError("kernel matrix is singular even with added jitter")


def _to_theta(h: KernelHyperparams) -> np.ndarray:
    return np.concatenate(
        [np.log(h.lengthscales), [np.log(h.signal_variance), np.log(h.noise_variance)]]
    )


def _from_theta(theta) -> KernelHyperparams:
    return KernelHyperparams(np.exp(theta[:-2]), math.exp(theta[-2]), math.exp(theta[-1]))


def neg_log_marginal_likelihood(theta, X, y, with_grad=True):
    """Negative log marginal likelihood and its gradient in log-parameters."""
    d = X.shape[1]
    ls = np.exp(theta[:d])
    s2 = math.exp(theta[d])
    noise = math.exp(theta[d + 1])
    n = X.shape[0]
    diff2 = (X[:, None, :] - X[None, :, :]) ** 2 / ls**2
    r = np.sqrt(diff2.sum(-1))
    e = np.exp(-SQRT5 * r)
    K = s2 * (1.0 + SQRT5 * r + 5.0 / 3.0 * r**2) * e
    Ky = K + noise * np.eye(n)
    try:
        L = np.linalg.cholesky(Ky)
    except np.linalg.LinAlgError:
        return (np.inf, np.zeros_like(theta)) if with_grad else np.inf
    alpha = linalg.cho_solve((L, True), y)
    nll = 0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * math.log(2 * math.pi)
    if not with_grad:
        return nll
    Kinv = linalg.cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty_like(theta)
    common = s2 * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e
    for k in range(d):
        grad[k] = -0.5 * np.sum(W * common * diff2[:, :, k])
    grad[d] = -0.5 * np.sum(W * K)
    grad[d + 1] = -0.5 * noise * np.trace(W)
    return nll, grad


def log_marginal_likelihood(X, y_std, hypers: KernelHyperparams) -> float:
    return -float(neg_log_marginal_likelihood(_to_theta(hypers), np.atleast_2d(X), np.asarray(y_std), False))


def _median_heuristic(X, config: FitConfig) -> KernelHyperparams:
    lo, hi = config.lengthscale_bounds
    if X.shape[0] > 1:
        dists = np.abs(X[:, None, :] - X[None, :, :])
        iu = np.triu_indices(X.shape[0], 1)
        ls = np.median(dists[iu], axis=0)
        ls = np.where(ls > 0, ls, 1.0)
    else:
        ls = np.ones(X.shape[1])
    return KernelHyperparams(np.clip(ls, lo, hi), 1.0, config.noise_bounds[0])


def fit_gp(X, y, config: FitConfig = FitConfig(), rng: np.random.Generator | None = None) -> GpModel:
    """Fit a GP to raw outcomes ``y`` at unit-cube inputs ``X``.

    Outcomes are standardized first. Hyperparameters come from L-BFGS-B on the
    log marginal likelihood, restarted from ``config.n_restarts`` log-uniform
    draws within the bounds; the best value seen anywhere (including the
    starting points themselves) wins.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y_std, stats = standardize(y)
    return fit_gp_standardized(X, y_std, stats, config, rng)


def fit_gp_standardized(X, y_std, stats, config: FitConfig = FitConfig(), rng=None) -> GpModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y_std = np.asarray(y_std, dtype=float)
    if X.shape[0] < 1:
        raise ValueError("fit_gp needs at least one observation")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    d = X.shape[1]
    bounds_lo = np.concatenate(
        [np.full(d, np.log(config.lengthscale_bounds[0])),
         [np.log(config.signal_variance_bounds[0]), np.log(config.noise_bounds[0])]]
    )
    bounds_hi = np.concatenate(
        [np.full(d, np.log(config.lengthscale_bounds[1])),
         [np.log(config.signal_variance_bounds[1]), np.log(config.noise_bounds[1])]]
    )
    starts = rng.uniform(bounds_lo, bounds_hi, size=(config.n_restarts, d + 2))

    best_theta, best_val = None, np.inf
    n_evals = 0
    for theta0 in starts:
        val0 = neg_log_marginal_likelihood(theta0, X, y_std, with_grad=False)
        if np.isfinite(val0) and val0 < best_val:
            best_theta, best_val = theta0, val0
        if not np.isfinite(val0):
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(
                neg_log_marginal_likelihood,
                theta0,
                args=(X, y_std),
                jac=True,
                method="L-BFGS-B",
                bounds=list(zip(bounds_lo, bounds_hi)),
                options={"maxiter": config.maxiter},
            )
        n_evals += res.nfev
        theta = np.clip(res.x, bounds_lo, bounds_hi)
        val = neg_log_marginal_likelihood(theta, X, y_std, with_grad=False)
        if np.isfinite(val) and val < best_val:
            best_theta, best_val = theta, val

    meta = {"n_evals": n_evals, "starts": [_from_theta(t) for t in starts]}
    if best_theta is None:
        logger.warning("marginal likelihood not finite at any restart; using median heuristic")
        hypers = _median_heuristic(X, config)
        meta["fallback"] = "median_heuristic"
    else:
        hypers = _from_theta(best_theta)
        meta["log_marginal_likelihood"] = -float(best_val)
    return GpModel.from_hypers(X, y_std, stats, hypers, meta)


def predict(model: GpModel, xs, full_cov: bool = True):
    """Posterior of the latent function at ``xs`` (standardized scale).

    Returns ``(mean, cov)``, or ``(mean, var)`` when ``full_cov`` is false.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    h = model.hypers
    if model.n == 0:
        mean = np.zeros(xs.shape[0])
        if full_cov:
            return mean, matern52(xs, xs, h)
        return mean, np.full(xs.shape[0], h.signal_variance)
    Ks = matern52(model.X, xs, h)
    mean = Ks.T @ model.alpha
    V = linalg.solve_triangular(model.chol, Ks, lower=True)
    if full_cov:
        cov = matern52(xs, xs, h) - V.T @ V
        cov = 0.5 * (cov + cov.T)
        return mean, cov
    var = h.signal_variance - (V * V).sum(0)
    return mean, np.maximum(var, 0.0)


def sample_joint(model: GpModel, xs, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n_samples`` joint posterior samples at ``xs``; shape (n_samples, len(xs))."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    mean, cov = predict(model, xs)
    return sample_mvn(mean, cov, n_samples, rng)


def sample_mvn(mean, cov, n_samples, rng, normals=None) -> np.ndarray:
    """Multivariate normal draws; ``normals`` (n_samples, len(mean)) replaces fresh i.i.d. draws."""
    _, F = psd_repair(cov)
    z = rng.standard_normal((n_samples, len(mean))) if normals is None else np.asarray(normals)
    return mean[None, :] + z @ F.T


def condition(model: GpModel, X_new, y_new_std) -> GpModel:
    """Add standardized observations to ``model`` without refitting hypers or stats."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    X = np.vstack([model.X, X_new]) if model.n else X_new
    y = np.concatenate([model.y, np.ravel(y_new_std)])
    return GpModel.from_hypers(X, y, model.stats, model.hypers, model.meta)


def drop_point(model: GpModel, j: int) -> GpModel:
    keep = np.arange(model.n) != j
    return GpModel.from_hypers(model.X[keep], model.y[keep], model.stats, model.hypers)


@dataclass(frozen=True)
class LooPosterior:
    """Leave-one-out posteriors of a fitted model.

    Row ``j`` of ``means`` / ``covs`` is the model with point ``j`` removed,
    evaluated jointly at every training input.
    """

    means: np.ndarray  # (n, n)
    covs: np.ndarray  # (n, n, n)

    @property
    def held_out_mean(self) -> np.ndarray:
        return np.diag(self.means).copy()

    @property
    def held_out_var(self) -> np.ndarray:
        return np.array([self.covs[j, j, j] for j in range(self.means.shape[0])])

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.held_out_mean.tolist(), self.held_out_var.tolist()))


def predict_loo(model: GpModel) -> LooPosterior:
    """Leave-one-out posteriors with the model's hyperparameters held fixed."""
    n = model.n
    if n < 2:
        raise LooUndefinedError("LOO undefined for fewer than 2 observations")
    means = np.empty((n, n))
    covs = np.empty((n, n, n))
    for j in range(n):
        sub = drop_point(model, j)
        means[j], covs[j] = predict(sub, model.X)
    return LooPosterior(means, covs)


def with_hypers(model: GpModel, hypers: KernelHyperparams) -> GpModel:
    return GpModel.from_hypers(model.X, model.y, model.stats, hypers)


__all__ = [
    "FitConfig",
    "GpModel",
    "KernelHyperparams",
    "LooPosterior",
    "LooUndefinedError",
    "StandardizationStats",
    "condition",
    "fit_gp",
    "fit_gp_standardized",
    "kernel_matern52_ard",
    "log_marginal_likelihood",
    "matern52",
    "predict",
    "predict_loo",
    "psd_repair",
    "sample_joint",
    "standardize",
]
