"""Evaluation metrics."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


def error_rate(preds, labels) -> float:
    """Fraction of mismatched class labels, as a percentage."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape or preds.size == 0:
        raise ContractError(f"error_rate needs matching nonempty arrays, got {preds.shape} vs {labels.shape}")
    return float(np.mean(preds != labels) * 100.0)


def rmse(preds, targets) -> float:
    """Root mean squared error; both sides in original target units."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape or preds.size == 0:
        raise ContractError(f"rmse needs matching nonempty arrays, got {preds.shape} vs {targets.shape}")
    diff = preds - targets
    return float(np.sqrt(np.mean(diff * diff)))
