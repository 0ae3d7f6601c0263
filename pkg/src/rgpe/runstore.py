"""JSON persistence for completed optimization runs.

One file per run::

    {"schema_version": 1, "task_id": ..., "space": {...},
     "observations": [{"x": [...], "y": ...}], "standardization": {...},
     "hypers": {...} (optional), "created_at": RFC 3339}

Python's ``json`` writes floats with ``repr``, the shortest decimal string
that round-trips, so values survive a save/load cycle bit for bit.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .gp import GpModel, KernelHyperparams, StandardizationStats, standardize
from .space import Observation, ParamSpace

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class RunStoreError(ValueError):
    pass


class SchemaVersionError(RunStoreError):
    def __init__(self, found, expected=SCHEMA_VERSION):
        super().__init__(f"unsupported schema_version {found!r} (expected {expected})")
        self.found = found
        self.expected = expected


def _now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")


@dataclass(eq=False)
class RunHistory:
    task_id: str
    space: ParamSpace
    observations: list[Observation]
    stats: StandardizationStats | None = None
    hypers: KernelHyperparams | None = None
    created_at: str = field(default_factory=_now_rfc3339)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.observations = [
            o if isinstance(o, Observation) else Observation(o["x"], o["y"]) for o in self.observations
        ]
        if self.observations:
            if not self.space.contains(self.X).all():
                raise RunStoreError(f"run {self.task_id!r}: observation outside the space")
            if self.stats is None:
                _, self.stats = standardize(self.y)
        elif self.stats is None:
            self.stats = StandardizationStats(0.0, 1.0)
        if self.hypers is not None and len(self.hypers.lengthscales) != self.space.d:
            raise RunStoreError(f"run {self.task_id!r}: hypers dimension mismatch")

    @property
    def X(self) -> np.ndarray:
        if not self.observations:
            return np.zeros((0, self.space.d))
        return np.array([o.x for o in self.observations])

    @property
    def y(self) -> np.ndarray:
        return np.array([o.y for o in self.observations], dtype=float)

    @classmethod
    def from_model(cls, task_id: str, space: ParamSpace, X, y, model: GpModel | None = None) -> "RunHistory":
        obs = [Observation(x, v) for x, v in zip(np.atleast_2d(X), y)]
        if model is None:
            return cls(task_id, space, obs)
        return cls(task_id, space, obs, model.stats, model.hypers)

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "task_id": self.task_id,
            "space": self.space.to_dict(),
            "observations": [{"x": list(o.x), "y": o.y} for o in self.observations],
            "standardization": {"mean": self.stats.mean, "std": self.stats.std},
            "created_at": self.created_at,
        }
        if self.hypers is not None:
            out["hypers"] = self.hypers.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunHistory":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(version)
        try:
            hypers = data.get("hypers")
            std = data["standardization"]
            return cls(
                task_id=str(data["task_id"]),
                space=ParamSpace.from_dict(data["space"]),
                observations=[Observation(o["x"], o["y"]) for o in data["observations"]],
                stats=StandardizationStats(float(std["mean"]), float(std["std"])),
                hypers=None if hypers is None else KernelHyperparams.from_dict(hypers),
                created_at=str(data["created_at"]),
                schema_version=version,
            )
        except (KeyError, TypeError) as exc:
            raise RunStoreError(f"malformed run file: {exc!r}") from exc

    def __eq__(self, other):
        if not isinstance(other, RunHistory):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def save_run(history: RunHistory, path, overwrite: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; pass overwrite=True to replace it")
    text = json.dumps(history.to_dict(), indent=1, allow_nan=False)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def load_run(path) -> RunHistory:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RunStoreError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise RunStoreError(f"{path}: top level must be an object")
    return RunHistory.from_dict(data)


@dataclass
class LoadError:
    path: Path
    error: Exception


def load_runs_with_errors(directory) -> tuple[list[RunHistory], list[LoadError]]:
    """Load every ``*.json`` run in ``directory``, sorted by task id.

    Files that fail to parse or validate are reported rather than raised.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a readable directory")
    runs, errors = [], []
    for path in sorted(directory.glob("*.json")):
        try:
            runs.append(load_run(path))
        except (RunStoreError, OSError, ValueError) as exc:
            logger.warning("could not load %s: %s", path, exc)
            errors.append(LoadError(path, exc))
    runs.sort(key=lambda r: r.task_id)
    return runs, errors


def load_runs(directory) -> list[RunHistory]:
    return load_runs_with_errors(directory)[0]
