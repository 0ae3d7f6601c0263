"""Benchmark problems: shifted Alpine-1 and families of related grid tasks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from ..runstore import RunHistory, load_run
from ..space import Observation, ParamSpace

ALPINE_DOMAIN = (0.0, 10.0)
ALPINE_SHIFTS = tuple(k * math.pi / 12 for k in range(1, 6))


@dataclass(eq=False)
class BenchmarkProblem:
    """A deterministic objective to minimize.

    Grid problems carry ``grid_values`` aligned with ``space.grid`` and are
    evaluated by candidate index; ``evaluate`` also accepts a point and
    looks it up.
    """

    space: ParamSpace
    evaluate: Callable[[np.ndarray], float]
    known_min: float | None = None
    label: str = ""
    grid_values: np.ndarray | None = field(default=None, repr=False)

    def evaluate_index(self, index: int) -> float:
        if self.grid_values is None:
            return float(self.evaluate(self.space.grid[index]))
        return float(self.grid_values[index])


def alpine_shifted(x, s):
    """x sin(x + pi + s) + x / 10."""
    x = np.asarray(x, dtype=float)
    out = x * np.sin(x + math.pi + s) + x / 10.0
    return out if out.ndim else float(out)


def _alpine_point(x, shift):
    return float(alpine_shifted(np.ravel(x)[0], shift))


def alpine_minimum(shift: float, domain=ALPINE_DOMAIN, n: int = 1_000_000) -> float:
    """Global minimum on ``domain``: dense scan, polished by a bounded 1-d search."""
    xs = np.linspace(domain[0], domain[1], n)
    vals = alpine_shifted(xs, shift)
    i = int(np.argmin(vals))
    h = (domain[1] - domain[0]) / (n - 1)
    lo, hi = max(domain[0], xs[i] - h), min(domain[1], xs[i] + h)
    res = optimize.minimize_scalar(
        lambda x: alpine_shifted(x, shift), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(min(vals[i], res.fun))


def alpine_problem(shift: float = 0.0, domain=ALPINE_DOMAIN) -> BenchmarkProblem:
    space = ParamSpace.box([domain])
    return BenchmarkProblem(
        space, partial(_alpine_point, shift=shift), alpine_minimum(shift, domain), f"alpine(s={shift:.4f})"
    )


@dataclass
class SyntheticSuite:
    target: BenchmarkProblem
    bases: list[RunHistory]
    shifts: tuple[float, ...]


def make_synthetic_suite(seed, n_base_points: int = 20, domain=ALPINE_DOMAIN) -> SyntheticSuite:
    """Target f(., 0) and five base runs of i.i.d. uniform points on f(., k pi / 12)."""
    rng = np.random.default_rng(seed)
    target = alpine_problem(0.0, domain)
    bases = []
    for k, s in enumerate(ALPINE_SHIFTS, start=1):
        x = rng.uniform(domain[0], domain[1], n_base_points)
        obs = [Observation([xi], alpine_shifted(xi, s)) for xi in x]
        bases.append(RunHistory(f"alpine_k{k}", target.space, obs, created_at="1970-01-01T00:00:00Z"))
    return SyntheticSuite(target, bases, ALPINE_SHIFTS)


def _grid_lookup(x, grid, values):
    x = np.ravel(np.asarray(x, dtype=float))
    dist = np.abs(grid - x).max(axis=1)
    i = int(np.argmin(dist))
    if dist[i] > 1e-9 * (1.0 + np.abs(x).max()):
        raise KeyError("point is not a grid candidate")
    return float(values[i])


def grid_problem(space: ParamSpace, values, label: str = "") -> BenchmarkProblem:
    values = np.asarray(values, dtype=float)
    if not space.is_grid or len(values) != len(space.grid):
        raise ValueError("grid problems need one value per grid candidate")
    return BenchmarkProblem(
        space, partial(_grid_lookup, grid=space.grid, values=values), float(values.min()), label, values
    )


def _bump(u, center, width):
    return np.exp(-0.5 * np.sum((u - center) ** 2, axis=-1) / width**2)


def make_grid_suite(
    n_tasks: int = 10,
    grid_size: int = 288,
    seed=0,
    d: int = 4,
    n_families: int = 3,
) -> list[BenchmarkProblem]:
    """A family of related finite-grid tasks sharing one candidate set.

    Tasks fall into ``n_families`` groups, assigned round-robin. A group
    fixes a landscape (one narrow global basin, a broad decoy basin, and a
    smooth trend); each task perturbs its group's basin locations, adds a
    small random Fourier term and a random affine rescaling of the outcomes.
    Tasks in one group are therefore similar, tasks across groups are not.
    """
    if n_tasks < 2:
        raise ValueError("need at least two tasks")
    rng = np.random.default_rng(seed)
    grid_u = qmc.Sobol(d, scramble=True, seed=rng).random_base2(int(np.ceil(np.log2(grid_size))))[:grid_size]
    space = ParamSpace.box([(0.0, 1.0)] * d, grid=grid_u)

    families = []
    for _ in range(n_families):
        families.append(
            dict(
                optimum=rng.uniform(0.15, 0.85, d),
                decoy=rng.uniform(0.1, 0.9, d),
                trend=rng.normal(0.0, 1.0, d),
            )
        )
    problems = []
    for t in range(n_tasks):
        fam = families[t % n_families]
        opt = np.clip(fam["optimum"] + rng.normal(0.0, 0.04, d), 0.0, 1.0)
        decoy = np.clip(fam["decoy"] + rng.normal(0.0, 0.04, d), 0.0, 1.0)
        freq = rng.normal(0.0, 3.0, (4, d))
        phase = rng.uniform(0.0, 2 * np.pi, 4)
        wiggle = 0.08 * np.cos(grid_u @ freq.T + phase).sum(axis=1)
        f = (
            -1.0 * _bump(grid_u, opt, 0.12)
            - 0.6 * _bump(grid_u, decoy, 0.3)
            + 0.15 * grid_u @ fam["trend"]
            + wiggle
        )
        scale = math.exp(rng.normal(0.0, 0.5))
        offset = rng.normal(0.0, 1.0)
        problems.append(grid_problem(space, offset + scale * f, f"grid_task{t:02d}"))
    return problems


def subsample_history(problem: BenchmarkProblem, n: int, rng, task_id: str | None = None) -> RunHistory:
    """A base run made of ``n`` grid points drawn without replacement."""
    idx = rng.choice(len(problem.grid_values), size=min(n, len(problem.grid_values)), replace=False)
    idx.sort()
    obs = [Observation(problem.space.grid[i], problem.grid_values[i]) for i in idx]
    return RunHistory(task_id or problem.label, problem.space, obs, created_at="1970-01-01T00:00:00Z")


def load_grid_problem(path) -> BenchmarkProblem:
    """Import an externally supplied grid table stored in the run-file format.

    The file's ``space.grid`` lists the candidates and its observations must
    give an outcome for every candidate.
    """
    run = load_run(path)
    if not run.space.is_grid:
        raise ValueError(f"{path}: run file has no grid")
    grid = run.space.grid
    values = np.full(len(grid), np.nan)
    for o in run.observations:
        dist = np.abs(grid - np.asarray(o.x)).max(axis=1)
        i = int(np.argmin(dist))
        if dist[i] > 1e-9 * (1.0 + np.abs(grid).max()):
            raise ValueError(f"{path}: observation {o.x} is not a grid candidate")
        values[i] = o.y
    if np.isnan(values).any():
        raise ValueError(f"{path}: {int(np.isnan(values).sum())} grid candidates have no outcome")
    return grid_problem(run.space, values, run.task_id)


def load_grid_problems(directory) -> list[BenchmarkProblem]:
    paths = sorted(Path(directory).glob("*.json"))
    problems = [load_grid_problem(p) for p in paths]
    problems.sort(key=lambda p: p.label)
    return problems
