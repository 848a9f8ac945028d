"""Deterministic, splittable random streams.

Built on numpy's Philox counter-based generator, so the raw bit stream is
identical across platforms for a given key. Child streams are derived by
hashing a label into the key, which makes every consumer independent of the
draw order of its siblings: adding a new module never reshuffles another
module's initialisation.
"""

from __future__ import annotations

import hashlib

import numpy as np

ALGORITHM = "philox4x64"


def _hash64(value) -> int:
    digest = hashlib.sha256(repr(value).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """A seeded, splittable source of random draws."""

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._gen = np.random.Generator(np.random.Philox(key=self._key()))

    def _key(self) -> int:
        h = hashlib.sha256()
        h.update(self.seed.to_bytes(8, "little", signed=True))
        for part in self.path:
            h.update(part.to_bytes(8, "little"))
        return int.from_bytes(h.digest()[:16], "little")

    def split(self, label) -> "RngStream":
        """Derive an independent child stream named by `label`."""
        return RngStream(self.seed, self.path + (_hash64(label),))

    def clone(self) -> "RngStream":
        """Fresh stream with the same seed and path (restarts the sequence)."""
        return RngStream(self.seed, self.path)

    # draw helpers ---------------------------------------------------------

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n, size=None, replace=False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path}, algorithm={ALGORITHM!r})"
