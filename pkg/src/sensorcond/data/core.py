"""Dataset model and canonical digests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, IngestionError
from ..sensors import ActiveSet, SensorCatalog

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes, state: int = FNV_OFFSET) -> int:
    """64-bit FNV-1a over a byte string (optionally chained via `state`)."""
    h = state
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class TaskSpec:
    kind: str                      # "classification" | "regression"
    num_classes: int | None = None

    def __post_init__(self):
        if self.kind not in ("classification", "regression"):
            raise ConfigError(f"task kind must be classification or regression, got {self.kind!r}")
        if self.kind == "classification" and (self.num_classes is None or self.num_classes < 2):
            raise ConfigError("classification tasks need num_classes >= 2")


@dataclass
class TimeSeriesInstance:
    """One series: [T, d] raw values, the sensors actually present, and the
    target (class index, or remaining life = total_life - T)."""

    id: str
    values: np.ndarray
    active: ActiveSet
    target: float | int
    total_life: int | None = None
    source: str | None = None

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise IngestionError(f"instance {self.id}: values must be [T, d], got {self.values.shape}")
        if self.values.shape[0] < 1:
            raise IngestionError(f"instance {self.id}: needs at least one timestep")
        if self.values.shape[1] != self.active.size:
            raise IngestionError(
                f"instance {self.id}: {self.values.shape[1]} columns vs {self.active.size} catalog sensors")

    @property
    def length(self) -> int:
        return self.values.shape[0]


@dataclass
class Dataset:
    """A bag of instances over one catalog; `normalization` names the scheme
    ("zscore" or "minmax") whose statistics are always computed from the
    training split alone."""

    catalog: SensorCatalog
    task: TaskSpec
    instances: list = field(default_factory=list)
    normalization: str = "zscore"

    def __post_init__(self):
        if self.normalization not in ("zscore", "minmax"):
            raise ConfigError(f"normalization must be zscore or minmax, got {self.normalization!r}")
        for inst in self.instances:
            if inst.values.shape[1] != self.catalog.size:
                raise IngestionError(
                    f"instance {inst.id}: width {inst.values.shape[1]} != catalog {self.catalog.size}")
            if self.task.kind == "classification":
                if not 0 <= int(inst.target) < self.task.num_classes:
                    raise IngestionError(f"instance {inst.id}: class {inst.target} out of range")

    def __len__(self):
        return len(self.instances)

    def replace_instances(self, instances) -> "Dataset":
        return Dataset(self.catalog, self.task, list(instances), self.normalization)


def instance_digest_bytes(inst: TimeSeriesInstance) -> bytes:
    head = inst.id.encode("utf-8") + b"\x00"
    head += np.packbits(inst.active.mask).tobytes() + b"\x00"
    head += np.float64(inst.target).tobytes()
    head += np.int64(-1 if inst.total_life is None else inst.total_life).tobytes()
    head += np.int64(inst.values.shape[0]).tobytes() + np.int64(inst.values.shape[1]).tobytes()
    return head + inst.values.tobytes()


def dataset_digest(dataset: Dataset) -> int:
    """Order-sensitive 64-bit FNV-1a over the canonical binary serialization."""
    h = fnv1a64(b"sensorcond-dataset-v1\x00")
    h = fnv1a64("\x00".join(dataset.catalog.names).encode("utf-8"), h)
    h = fnv1a64(dataset.task.kind.encode() + bytes([dataset.task.num_classes or 0]), h)
    h = fnv1a64(dataset.normalization.encode(), h)
    for inst in dataset.instances:
        h = fnv1a64(instance_digest_bytes(inst), h)
    return h


def bundle_digest(splits: dict) -> int:
    """Digest of a named family of splits (sorted by split name)."""
    h = fnv1a64(b"sensorcond-bundle-v1\x00")
    for name in sorted(splits):
        h = fnv1a64(name.encode("utf-8") + b"\x00", h)
        h = fnv1a64(dataset_digest(splits[name]).to_bytes(8, "little"), h)
    return h
