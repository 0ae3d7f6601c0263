"""Ranking-weighted Gaussian process ensembles for warm-starting Bayesian optimization."""

from .acquisition import AcquisitionContext, expected_improvement, fantasy_ei, optimize_acquisition
from .ensemble import EnsembleConfig, EnsembleModel, compute_weights, ensemble_predict, fit_ensemble
from .gp import FitConfig, GpModel, KernelHyperparams, fit_gp, predict, predict_loo
from .runstore import RunHistory, load_runs, save_run
from .space import Dim, Observation, ParamSpace

__version__ = "0.1.0"

__all__ = [
    "AcquisitionContext",
    "Dim",
    "EnsembleConfig",
    "EnsembleModel",
    "FitConfig",
    "GpModel",
    "KernelHyperparams",
    "Observation",
    "ParamSpace",
    "RunHistory",
    "compute_weights",
    "ensemble_predict",
    "expected_improvement",
    "fantasy_ei",
    "fit_ensemble",
    "fit_gp",
    "load_runs",
    "optimize_acquisition",
    "predict",
    "predict_loo",
    "save_run",
]
