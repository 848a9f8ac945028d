"""Sensor-combination plans for training and evaluation.

A plan holds a small number of base combinations (each masking a fixed
fraction of the catalog) plus derived combinations obtained by masking
additional sensors inside a base set. Test-time combinations are rejection
sampled until they differ from every combination in the plan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, GenerationError
from ..sensors import ActiveSet, SensorCatalog

_MAX_TRIES = 1000


def mask_count(fraction: float, size: int) -> int:
    """Number of sensors to mask: round-half-to-even of fraction * size."""
    return int(round(fraction * size))


@dataclass
class CombinationPlan:
    base: list
    derived: list
    masked_fraction: float
    seed: int | None = None

    @property
    def combinations(self) -> list:
        """Base then derived, in generation order; indices are stable."""
        return self.base + self.derived

    def mask_keys(self) -> set:
        return {c.key() for c in self.combinations}

    def __len__(self):
        return len(self.base) + len(self.derived)


def _draw_mask(catalog_size: int, n_masked: int, rng) -> ActiveSet:
    masked = rng.choice(catalog_size, size=n_masked, replace=False)
    mask = np.ones(catalog_size, dtype=bool)
    mask[masked] = False
    return ActiveSet(mask)


def generate_combinations(catalog: SensorCatalog, masked_fraction: float,
                          n_base: int = 16, n_total: int = 64, rng=None) -> CombinationPlan:
    """Build the training plan: n_base distinct sets each masking
    round(f*d) sensors, plus (n_total - n_base)/n_base derived sets per base
    masking round(f*d/2) additional sensors. All sets are pairwise distinct
    and every derived set is a strict subset of its base."""
    d = catalog.size
    if not 0.0 < masked_fraction < 1.0:
        raise ConfigError(f"masked fraction must be in (0, 1), got {masked_fraction}")
    n_masked = mask_count(masked_fraction, d)
    if n_masked < 1:
        raise ConfigError(f"fraction {masked_fraction} masks no sensor of {d}")
    if d - n_masked < 1:
        raise ConfigError(f"fraction {masked_fraction} would mask the whole catalog")
    if n_total < n_base or n_base < 1 or (n_total - n_base) % n_base != 0:
        raise ConfigError(f"cannot derive {n_total - n_base} sets evenly from {n_base} bases")
    per_base = (n_total - n_base) // n_base
    extra = mask_count(masked_fraction * 0.5, d)
    if per_base > 0 and extra < 1:
        raise GenerationError(
            f"derived combinations need at least one extra masked sensor (d={d}, f={masked_fraction})")
    if per_base > 0 and d - n_masked - extra < 1:
        raise GenerationError("derived combinations would mask the whole catalog")

    seen: set = set()
    base: list = []
    tries = 0
    while len(base) < n_base:
        cand = _draw_mask(d, n_masked, rng)
        if cand.key() not in seen:
            seen.add(cand.key())
            base.append(cand)
        else:
            tries += 1
            if tries > _MAX_TRIES:
                raise GenerationError(
                    f"could not draw {n_base} distinct base combinations (d={d}, masked={n_masked})")

    derived: list = []
    for parent in base:
        made = 0
        tries = 0
        avail = parent.indices
        while made < per_base:
            drop = rng.choice(avail.shape[0], size=extra, replace=False)
            mask = parent.mask.copy()
            mask[avail[drop]] = False
            cand = ActiveSet(mask)
            if cand.key() not in seen:
                seen.add(cand.key())
                derived.append(cand)
                made += 1
            else:
                tries += 1
                if tries > _MAX_TRIES:
                    raise GenerationError(
                        f"could not derive {per_base} distinct subsets per base (d={d})")

    return CombinationPlan(base, derived, masked_fraction)


def sample_test_combination(catalog: SensorCatalog, masked_fraction: float,
                            plan: CombinationPlan, rng=None,
                            exclude: set | None = None) -> ActiveSet:
    """Draw one combination masking round(f*d) sensors that is unseen with
    respect to the plan (and any extra `exclude` keys)."""
    d = catalog.size
    if not 0.0 < masked_fraction < 1.0:
        raise ConfigError(f"masked fraction must be in (0, 1), got {masked_fraction}")
    n_masked = mask_count(masked_fraction, d)
    if n_masked < 1 or d - n_masked < 1:
        raise ConfigError(f"fraction {masked_fraction} is degenerate for d={d}")
    banned = plan.mask_keys()
    if exclude:
        banned |= set(exclude)
    for _ in range(_MAX_TRIES):
        cand = _draw_mask(d, n_masked, rng)
        if cand.key() not in banned:
            return cand
    raise GenerationError(
        f"no unseen combination with {n_masked} of {d} masked after {_MAX_TRIES} tries")


def assign_combinations(n_instances: int, plan: CombinationPlan, rng) -> np.ndarray:
    """Round-robin combination index per instance, over a shuffled instance
    order, so every combination receives ~n/len(plan) instances."""
    order = rng.permutation(n_instances)
    assignment = np.empty(n_instances, dtype=np.intp)
    assignment[order] = np.arange(n_instances) % len(plan)
    return assignment
