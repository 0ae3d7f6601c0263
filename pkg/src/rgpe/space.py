"""Bounded search spaces and the mapping to the unit cube used by the GP layer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float
    scale: str = "linear"

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise ValueError(f"dimension {self.name!r}: unknown scale {self.scale!r}")
        if not self.lower < self.upper:
            raise ValueError(f"dimension {self.name!r}: lower must be < upper")
        if self.scale == "log" and self.lower <= 0:
            raise ValueError(f"dimension {self.name!r}: log scale needs lower > 0")


@dataclass(frozen=True)
class ParamSpace:
    """A box of named dimensions, optionally restricted to a finite grid.

    All model code works on ``[0, 1]^d``; :meth:`to_unit` and
    :meth:`from_unit` convert between that cube and natural units (log-scaled
    dimensions are mapped linearly in log space).
    """

    dims: tuple[Dim, ...]
    grid: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if self.grid is not None:
            grid = np.atleast_2d(np.asarray(self.grid, dtype=float))
            if grid.shape[1] != self.d:
                raise ValueError("grid points must have one coordinate per dimension")
            if not self.contains(grid).all():
                raise ValueError("grid candidates must lie within bounds")
            grid.setflags(write=False)
            object.__setattr__(self, "grid", grid)

    @classmethod
    def box(cls, bounds: Sequence[tuple[float, float]], grid=None) -> "ParamSpace":
        dims = [Dim(f"x{i}", float(lo), float(hi)) for i, (lo, hi) in enumerate(bounds)]
        return cls(tuple(dims), grid)

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def is_grid(self) -> bool:
        return self.grid is not None

    def _lo_hi(self):
        lo = np.array([np.log(d.lower) if d.scale == "log" else d.lower for d in self.dims])
        hi = np.array([np.log(d.upper) if d.scale == "log" else d.upper for d in self.dims])
        return lo, hi

    def _is_log(self):
        return np.array([d.scale == "log" for d in self.dims])

    def to_unit(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        is_log = self._is_log()
        z = np.where(is_log, np.log(np.where(is_log, x, 1.0)), x)
        lo, hi = self._lo_hi()
        return (z - lo) / (hi - lo)

    def from_unit(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        lo, hi = self._lo_hi()
        z = lo + u * (hi - lo)
        is_log = self._is_log()
        x = np.where(is_log, np.exp(np.where(is_log, z, 0.0)), z)
        # exp/log round-off can step outside the box by an ulp
        lower = np.array([d.lower for d in self.dims])
        upper = np.array([d.upper for d in self.dims])
        return np.clip(x, lower, upper)

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lower = np.array([d.lower for d in self.dims])
        upper = np.array([d.upper for d in self.dims])
        span = upper - lower
        return np.all((x >= lower - tol * span) & (x <= upper + tol * span), axis=1)

    def grid_unit(self) -> np.ndarray:
        if self.grid is None:
            raise ValueError("space has no grid")
        return self.to_unit(self.grid)

    def to_dict(self) -> dict:
        out = {
            "dims": [
                {"name": d.name, "lower": d.lower, "upper": d.upper, "scale": d.scale}
                for d in self.dims
            ]
        }
        if self.grid is not None:
            out["grid"] = self.grid.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ParamSpace":
        dims = tuple(
            Dim(str(d["name"]), float(d["lower"]), float(d["upper"]), d.get("scale", "linear"))
            for d in data["dims"]
        )
        grid = data.get("grid")
        return cls(dims, None if grid is None else np.asarray(grid, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, ParamSpace):
            return NotImplemented
        if self.dims != other.dims:
            return False
        if self.grid is None or other.grid is None:
            return self.grid is None and other.grid is None
        return self.grid.shape == other.grid.shape and bool(np.array_equal(self.grid, other.grid))

    __hash__ = None


@dataclass(frozen=True)
class Observation:
    x: tuple[float, ...]
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.ravel(self.x)))
        if not np.isfinite(self.y):
            raise ValueError("observation outcome must be finite")
        object.__setattr__(self, "y", float(self.y))


def observations_to_arrays(obs: Sequence[Observation]) -> tuple[np.ndarray, np.ndarray]:
    if not obs:
        return np.zeros((0, 0)), np.zeros(0)
    X = np.array([o.x for o in obs], dtype=float)
    y = np.array([o.y for o in obs], dtype=float)
    return X, y
