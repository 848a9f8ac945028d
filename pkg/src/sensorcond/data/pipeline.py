"""Windowing, splitting, and homogeneous mini-batching."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ContractError
from ..sensors import ActiveSet
from .combos import CombinationPlan
from .core import Dataset, TimeSeriesInstance
from .stats import Stats, normalize_target, prepare_instance

log = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "val", "finetune", "test")
DEFAULT_FRACTIONS = (0.40, 0.10, 0.10, 0.40)


def window(inst: TimeSeriesInstance, length: int = 100, shift: int = 5) -> list:
    """Cut one run-to-failure series into overlapping windows.

    Window k covers cycles [k*shift, k*shift + length); its remaining-life
    target is total_life minus the absolute index of its last cycle. Series
    shorter than `length` are skipped with a warning.
    """
    t = inst.length
    if t < length:
        log.warning("skipping %s: length %d < window %d", inst.id, t, length)
        return []
    total = inst.total_life if inst.total_life is not None else t + int(inst.target)
    out = []
    for k, start in enumerate(range(0, t - length + 1, shift)):
        out.append(TimeSeriesInstance(
            id=f"{inst.id}#w{k}",
            values=inst.values[start:start + length],
            active=inst.active,
            target=float(total - (start + length)),
            total_life=total,
            source=inst.source,
        ))
    return out


def window_dataset(ds: Dataset, length: int = 100, shift: int = 5) -> Dataset:
    out = []
    for inst in ds.instances:
        out.extend(window(inst, length, shift))
    return ds.replace_instances(out)


def _allocate(n: int, fractions) -> list[int]:
    """Largest-remainder allocation of n items to the fractions."""
    raw = [f * n for f in fractions]
    counts = [int(np.floor(r)) for r in raw]
    rest = n - sum(counts)
    order = np.argsort([-(r - np.floor(r)) for r in raw], kind="stable")
    for i in range(rest):
        counts[order[i]] += 1
    return counts


def split(ds: Dataset, fractions=DEFAULT_FRACTIONS, rng=None, stratify: bool | None = None):
    """Disjoint instance-level partition into (train, val, finetune, test).

    Classification splits are stratified by class unless a class has fewer
    instances than splits, in which case the whole split falls back to
    unstratified with a warning. Deterministic given the rng stream.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    n = len(ds.instances)
    use_strat = ds.task.kind == "classification" if stratify is None else stratify
    if use_strat:
        by_class: dict[int, list[int]] = {}
        for i, inst in enumerate(ds.instances):
            by_class.setdefault(int(inst.target), []).append(i)
        if min(len(v) for v in by_class.values()) < len(fractions):
            log.warning("a class has fewer instances than splits; falling back to unstratified")
            use_strat = False

    buckets: list[list[int]] = [[] for _ in fractions]
    if use_strat:
        for cls in sorted(by_class):
            members = np.asarray(by_class[cls])
            members = members[rng.permutation(len(members))]
            counts = _allocate(len(members), fractions)
            pos = 0
            for b, c in enumerate(counts):
                buckets[b].extend(members[pos:pos + c].tolist())
                pos += c
    else:
        order = rng.permutation(n)
        counts = _allocate(n, fractions)
        pos = 0
        for b, c in enumerate(counts):
            buckets[b].extend(order[pos:pos + c].tolist())
            pos += c

    return tuple(ds.replace_instances([ds.instances[i] for i in sorted(bucket)])
                 for bucket in buckets)


@dataclass
class MiniBatch:
    """A homogeneous batch: every instance shares one availability mask."""

    active: ActiveSet
    inputs: np.ndarray            # [B, T, d], normalized and imputed
    targets: np.ndarray           # class ids, or normalized RUL values
    size: int


def make_batches(ds: Dataset, assignment, plan: CombinationPlan | None,
                 stats: Stats, batch_size: int, rng,
                 force_full: bool = False):
    """Yield one epoch of homogeneous mini-batches.

    Instances are bucketed by their assigned combination (and by length, so
    stacking is rectangular), shuffled within buckets, and the resulting
    batches are emitted in shuffled order. The last partial batch of every
    bucket is kept.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be positive")
    full = ActiveSet.full(ds.catalog.size)
    buckets: dict = {}
    for i, inst in enumerate(ds.instances):
        if force_full:
            comb = full
        elif plan is None:
            # no plan: the instance's own availability is the combination
            comb = inst.active
        else:
            comb = plan.combinations[int(assignment[i])]
        buckets.setdefault((comb.key(), inst.length), (comb, []))[1].append(i)

    pending = []
    for (ckey, _t), (comb, members) in sorted(buckets.items()):
        members = np.asarray(members)
        members = members[rng.permutation(len(members))]
        for start in range(0, len(members), batch_size):
            pending.append((comb, members[start:start + batch_size]))
    emit_order = rng.permutation(len(pending))

    for b in emit_order:
        comb, members = pending[b]
        insts = [ds.instances[i] for i in members]
        inputs = np.stack([prepare_instance(inst, comb, stats, ds.normalization)
                           for inst in insts])
        if ds.task.kind == "classification":
            targets = np.asarray([int(inst.target) for inst in insts], dtype=np.int64)
        else:
            targets = np.asarray([normalize_target(inst.target, stats) for inst in insts])
        yield MiniBatch(active=comb, inputs=inputs, targets=targets, size=len(insts))


def remask(ds: Dataset, active: ActiveSet) -> Dataset:
    """Re-declare availability: every instance keeps its values but only the
    sensors in `active` (intersected with its own) count as present."""
    out = []
    for inst in ds.instances:
        out.append(TimeSeriesInstance(
            id=inst.id, values=inst.values, active=inst.active.intersect(active),
            target=inst.target, total_life=inst.total_life, source=inst.source))
    return ds.replace_instances(out)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ContractError(f"label out of range for {num_classes} classes")
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out
