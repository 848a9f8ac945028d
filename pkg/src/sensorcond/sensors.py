"""Sensor catalog and active-set primitives shared across the package."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, EmptySetError


class SensorCatalog:
    """Canonical, ordered universe of sensor names. The ordering is part of
    the data contract: column i of every series belongs to sensor names[i]."""

    __slots__ = ("names", "_index")

    def __init__(self, names):
        names = tuple(str(n) for n in names)
        if len(names) == 0:
            raise ConfigError("catalog needs at least one sensor")
        if len(set(names)) != len(names):
            raise ConfigError("sensor names must be unique")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def size(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        return self._index[name]

    def __eq__(self, other):
        return isinstance(other, SensorCatalog) and self.names == other.names

    def __repr__(self):
        return f"SensorCatalog({len(self.names)} sensors)"


class ActiveSet:
    """Which sensors are present, as a bitmask in catalog order."""

    __slots__ = ("mask",)

    def __init__(self, mask):
        # private copy: the mask is frozen, never the caller's array
        mask = np.array(mask, dtype=bool, copy=True)
        if mask.ndim != 1:
            raise ConfigError(f"active mask must be 1-d, got shape {mask.shape}")
        if not mask.any():
            raise EmptySetError("an active set may not be empty")
        self.mask = mask
        self.mask.setflags(write=False)

    @classmethod
    def full(cls, size: int) -> "ActiveSet":
        return cls(np.ones(size, dtype=bool))

    @classmethod
    def from_indices(cls, size: int, indices) -> "ActiveSet":
        mask = np.zeros(size, dtype=bool)
        mask[np.asarray(indices, dtype=np.intp)] = True
        return cls(mask)

    @classmethod
    def from_names(cls, catalog: SensorCatalog, names) -> "ActiveSet":
        return cls.from_indices(catalog.size, [catalog.index_of(n) for n in names])

    @property
    def size(self) -> int:
        return self.mask.shape[0]

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def names(self, catalog: SensorCatalog) -> list[str]:
        return [catalog.names[i] for i in self.indices]

    def intersect(self, other: "ActiveSet") -> "ActiveSet":
        return ActiveSet(self.mask & other.mask)

    def key(self) -> bytes:
        """Hashable identity of the mask (used for bucketing and plans)."""
        return np.packbits(self.mask).tobytes() + bytes([self.size & 0xFF])

    def __eq__(self, other):
        return isinstance(other, ActiveSet) and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"ActiveSet({self.count}/{self.size})"
