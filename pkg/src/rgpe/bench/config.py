"""Experiment settings read from a flat TOML file.

Example::

    n_loss_samples = 256        # S, loss samples per model
    dilution_percentile = 95.0
    fantasy_count = 16
    rhos = [0.1, 0.9]           # bandwidths used when a strategy is plain "tstr"
    workers = 4
    seeds = [0, 1, 2]
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .driver import RunConfig


@dataclass(frozen=True)
class BenchConfig:
    init: int = 3
    budget: int = 20
    n_loss_samples: int = 256
    dilution_percentile: float = 95.0
    fantasy_count: int = 16
    integrate_fbest: bool = False
    n_pending: int = 0
    n_probes: int = 1000
    n_refine: int = 10
    rhos: tuple[float, ...] = (0.1, 0.9)
    workers: int = 1
    seeds: tuple[int, ...] | None = None

    def run_config(self) -> RunConfig:
        names = {f.name for f in dataclasses.fields(RunConfig)}
        return RunConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def expand_strategies(self, strategies) -> list[str]:
        """Replace a bare ``tstr`` by one ``tstr@rho`` per configured bandwidth."""
        out = []
        for s in strategies:
            s = s.strip()
            if s == "tstr":
                out.extend(f"tstr@{r:g}" for r in self.rhos)
            elif s:
                out.append(s)
        return out

    def updated(self, **overrides) -> "BenchConfig":
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_config(path) -> BenchConfig:
    data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    known = {f.name for f in dataclasses.fields(BenchConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    for key in ("rhos", "seeds"):
        if key in data:
            data[key] = tuple(data[key])
    return BenchConfig(**data)
