"""Normalization statistics and mean imputation.

Statistics come from the training split only, and only from timesteps of
instances where the sensor is actually present. Unavailable sensors are
filled with the sensor's training mean expressed in normalized space, which
is exactly 0 under z-normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CoverageError
from ..sensors import ActiveSet
from .core import Dataset, TimeSeriesInstance

STD_FLOOR = 1e-8  # degenerate (constant) sensors fall back to unit scale


@dataclass
class Stats:
    mean: np.ndarray
    std: np.ndarray          # population convention, floored at 1 when ~0
    vmin: np.ndarray
    vmax: np.ndarray
    target_min: float | None = None
    target_max: float | None = None

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(), "std": self.std.tolist(),
            "vmin": self.vmin.tolist(), "vmax": self.vmax.tolist(),
            "target_min": self.target_min, "target_max": self.target_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Stats":
        return cls(np.asarray(d["mean"]), np.asarray(d["std"]),
                   np.asarray(d["vmin"]), np.asarray(d["vmax"]),
                   d["target_min"], d["target_max"])


def compute_stats(train: Dataset) -> Stats:
    """Per-sensor mean/std and min/max over active cells of the training
    split, plus target min/max for regression tasks."""
    d = train.catalog.size
    total = np.zeros(d)
    sq_total = np.zeros(d)
    count = np.zeros(d, dtype=np.int64)
    vmin = np.full(d, np.inf)
    vmax = np.full(d, -np.inf)

    for inst in train.instances:
        cols = inst.active.indices
        vals = inst.values[:, cols]
        total[cols] += vals.sum(axis=0)
        sq_total[cols] += (vals * vals).sum(axis=0)
        count[cols] += vals.shape[0]
        vmin[cols] = np.minimum(vmin[cols], vals.min(axis=0))
        vmax[cols] = np.maximum(vmax[cols], vals.max(axis=0))

    missing = np.flatnonzero(count == 0)
    if missing.size:
        names = ", ".join(train.catalog.names[i] for i in missing)
        raise CoverageError(f"no training coverage for sensor(s): {names}")

    mean = total / count
    var = sq_total / count - mean * mean
    std = np.sqrt(np.maximum(var, 0.0))
    std = np.where(std < STD_FLOOR, 1.0, std)
    span = vmax - vmin
    vmax = np.where(span < STD_FLOOR, vmin + 1.0, vmax)

    target_min = target_max = None
    if train.task.kind == "regression":
        targets = [float(inst.target) for inst in train.instances]
        target_min, target_max = min(targets), max(targets)
        if target_max - target_min < STD_FLOOR:
            target_max = target_min + 1.0
    return Stats(mean, std, vmin, vmax, target_min, target_max)


def normalize(values: np.ndarray, stats: Stats, scheme: str) -> np.ndarray:
    if scheme == "zscore":
        return (values - stats.mean) / stats.std
    return (values - stats.vmin) / (stats.vmax - stats.vmin)


def normalized_mean(stats: Stats, scheme: str) -> np.ndarray:
    """Each sensor's training mean expressed in normalized space."""
    if scheme == "zscore":
        return np.zeros_like(stats.mean)
    return (stats.mean - stats.vmin) / (stats.vmax - stats.vmin)


def mean_impute(values: np.ndarray, active: ActiveSet, stats: Stats, scheme: str) -> np.ndarray:
    """Fill inactive columns of already-normalized values with the sensor's
    normalized training mean. Idempotent: filling twice changes nothing."""
    out = np.array(values, dtype=np.float64, copy=True)
    fill = normalized_mean(stats, scheme)
    out[:, ~active.mask] = fill[~active.mask]
    return out


def prepare_instance(inst: TimeSeriesInstance, active: ActiveSet,
                     stats: Stats, scheme: str) -> np.ndarray:
    """Normalize then impute one instance under an availability mask.

    The effective mask is the intersection of the instance's own active set
    with the requested one: a sensor absent from the source data can never
    contribute readings, whatever the protocol asks for.
    """
    effective = inst.active.intersect(active)
    return mean_impute(normalize(inst.values, stats, scheme), effective, stats, scheme)


def normalize_target(target: float, stats: Stats) -> float:
    return (float(target) - stats.target_min) / (stats.target_max - stats.target_min)


def denormalize_target(value: float, stats: Stats) -> float:
    return float(value) * (stats.target_max - stats.target_min) + stats.target_min
