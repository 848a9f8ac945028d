"""Synthetic datasets for desk-scale verification.

Classification: each class is a stable linear latent system with its own
rotation dynamics and mean offset; sensors read one latent dimension
strongly plus weak random cross-mixing, with additive observation noise.
Labels therefore stay recoverable from any suitably large sensor subset,
degrade gracefully as sensors disappear, and one designated sensor (the
last) carries pure noise.

Regression: monotone degradation curves with per-sensor response and
offset; each instance is an engine truncated at a random cycle, so the
target is the remaining life and windowing remains applicable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff.rng import RngStream
from ..errors import ConfigError
from ..sensors import ActiveSet, SensorCatalog
from .core import Dataset, TaskSpec, TimeSeriesInstance

NOISE_SD = 0.1


@dataclass
class SynthConfig:
    task: str = "classification"
    sensors: int = 12
    num_classes: int = 4
    instances: int = 800
    length: int = 32
    seed: int = 0
    latent: int = 5
    offset_scale: float = 0.4
    process_sd: float = 0.25
    cross_mix: float = 0.15

    def __post_init__(self):
        if self.sensors < 4:
            raise ConfigError(f"synthetic data needs at least 4 sensors, got {self.sensors}")
        if self.instances < 40:
            raise ConfigError(f"synthetic data needs at least 40 instances, got {self.instances}")
        if self.task not in ("classification", "regression"):
            raise ConfigError(f"task must be classification or regression, got {self.task!r}")


def _catalog(d: int) -> SensorCatalog:
    return SensorCatalog([f"s{i:02d}" for i in range(d)])


def noise_sensor_index(cfg: SynthConfig) -> int:
    """The sensor whose readings carry no signal (by construction)."""
    return cfg.sensors - 1


def _rotation(p: int, angle: float, plane: tuple, damping: float) -> np.ndarray:
    a = np.eye(p) * damping
    i, j = plane
    c, s = np.cos(angle), np.sin(angle)
    a[i, i] = c * damping
    a[i, j] = -s * damping
    a[j, i] = s * damping
    a[j, j] = c * damping
    return a


def _classification(cfg: SynthConfig, rng: RngStream) -> Dataset:
    d, p, k_classes = cfg.sensors, cfg.latent, cfg.num_classes
    sys_rng = rng.split("system")

    # per-class dynamics: damped rotation at a class-specific frequency
    planes = [(i % p, (i + 1) % p) for i in range(k_classes)]
    angles = 0.25 + 0.5 * np.arange(k_classes) / max(1, k_classes - 1)
    dynamics = [_rotation(p, angles[k], planes[k], 0.92) for k in range(k_classes)]

    # per-class mean offsets: distinct sign patterns scaled down so that
    # masking genuinely erodes the margin
    patterns = set()
    offsets = []
    while len(offsets) < k_classes:
        pat = tuple(int(v) for v in sys_rng.integers(0, 2, size=p))
        if pat in patterns:
            continue
        patterns.add(pat)
        offsets.append(cfg.offset_scale * (2.0 * np.asarray(pat) - 1.0))

    # each sensor is one dimension's reader, with a heterogeneous gain and
    # sign plus weak cross-talk, so the best recombination of the surviving
    # readers depends on which sensors are present; the last sensor reads
    # nothing at all
    mixing = sys_rng.normal(0.0, cfg.cross_mix / np.sqrt(p), size=(d, p))
    gains = sys_rng.uniform(0.6, 1.6, size=d)
    signs = np.where(sys_rng.uniform(size=d) < 0.5, -1.0, 1.0)
    for j in range(d):
        mixing[j, j % p] += gains[j] * signs[j]
    mixing[noise_sensor_index(cfg)] = 0.0

    catalog = _catalog(d)
    full = ActiveSet.full(d)
    instances = []
    for i in range(cfg.instances):
        k = i % k_classes
        inst_rng = rng.split(("instance", i))
        s = inst_rng.normal(0.0, 0.5, size=p)
        rows = np.empty((cfg.length, d))
        for t in range(cfg.length):
            s = dynamics[k] @ s + inst_rng.normal(0.0, cfg.process_sd, size=p)
            z = offsets[k] + s
            rows[t] = mixing @ z + inst_rng.normal(0.0, NOISE_SD, size=d)
        instances.append(TimeSeriesInstance(
            id=f"synth-{i:05d}", values=rows, active=full, target=k, source="synth"))
    return Dataset(catalog=catalog, task=TaskSpec("classification", k_classes),
                   instances=instances, normalization="zscore")


def _regression(cfg: SynthConfig, rng: RngStream) -> Dataset:
    d = cfg.sensors
    sys_rng = rng.split("system")
    response = sys_rng.uniform(0.5, 1.5, size=d) * np.where(sys_rng.uniform(size=d) < 0.5, -1.0, 1.0)
    offset = sys_rng.normal(0.0, 0.5, size=d)
    response[noise_sensor_index(cfg)] = 0.0

    catalog = _catalog(d)
    full = ActiveSet.full(d)
    instances = []
    for i in range(cfg.instances):
        inst_rng = rng.split(("instance", i))
        life = int(inst_rng.integers(cfg.length, 2 * cfg.length + 1))
        t_obs = int(inst_rng.integers(max(2, cfg.length // 2), life + 1))
        cycles = np.arange(1, t_obs + 1)
        health = 1.0 - (cycles / life) ** 1.3
        rows = (response[None, :] * health[:, None] + offset[None, :]
                + inst_rng.normal(0.0, NOISE_SD, size=(t_obs, d)))
        instances.append(TimeSeriesInstance(
            id=f"synth-{i:05d}", values=rows, active=full,
            target=float(life - t_obs), total_life=life, source="synth"))
    return Dataset(catalog=catalog, task=TaskSpec("regression"),
                   instances=instances, normalization="minmax")


def synth_generate(cfg: SynthConfig) -> Dataset:
    """Deterministic synthetic dataset for the configured task."""
    rng = RngStream(cfg.seed).split("synth")
    if cfg.task == "classification":
        return _classification(cfg, rng)
    return _regression(cfg, rng)
