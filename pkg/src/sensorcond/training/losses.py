"""Training objectives."""

from __future__ import annotations

from ..autodiff import Tensor, ops
from ..errors import DimensionError

LOG_FLOOR = 1e-12


def cross_entropy(probs: Tensor, one_hot_targets: Tensor) -> Tensor:
    """Mean over the batch of -log(probability of the true class).

    `probs` rows must already be probability vectors (post-softmax); the log
    is floored at 1e-12 so perfect-confidence mistakes stay finite.
    """
    if probs.data.shape != one_hot_targets.data.shape:
        raise DimensionError(
            f"cross_entropy shapes {probs.data.shape} and {one_hot_targets.data.shape} differ")
    picked = ops.mul(one_hot_targets, ops.log_clamped(probs, LOG_FLOOR))
    batch = probs.data.shape[0]
    return ops.scale(ops.sum_all(picked), -1.0 / batch)


def squared_error(predictions: Tensor, targets: Tensor) -> Tensor:
    """Mean squared difference, in normalized-target space."""
    if predictions.data.shape != targets.data.shape:
        raise DimensionError(
            f"squared_error shapes {predictions.data.shape} and {targets.data.shape} differ")
    diff = ops.sub(predictions, targets)
    return ops.mean_all(ops.mul(diff, diff))
