"""Benchmarks, the optimization driver and experiment aggregation."""

from .driver import RunConfig, RunTrace, Strategy, run_optimization
from .experiment import ExperimentResult, export_results, load_result, replicate, traces_from_csv
from .problems import BenchmarkProblem, alpine_problem, make_grid_suite, make_synthetic_suite

__all__ = [
    "BenchmarkProblem",
    "ExperimentResult",
    "RunConfig",
    "RunTrace",
    "Strategy",
    "alpine_problem",
    "export_results",
    "load_result",
    "make_grid_suite",
    "make_synthetic_suite",
    "replicate",
    "run_optimization",
    "traces_from_csv",
]
