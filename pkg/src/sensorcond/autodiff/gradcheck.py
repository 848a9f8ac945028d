"""Finite-difference verification of tape gradients.

This is the independent oracle for the whole autodiff stack: analytic
gradients from a backward pass are compared coordinate-by-coordinate against
central differences of the forward value. The forward function must be
deterministic (disable dropout or clone its rng stream per call).
"""

from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor


def grad_check(build, params, step: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    `build` is a zero-argument callable returning a scalar loss Tensor; it
    must re-run the full forward pass from `params` on every call. The
    relative error for a coordinate is |analytic - numeric| / max(1, |numeric|).
    """
    params = list(params)
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = build()
        tape.backward(loss, params=params)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for p, grads in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = grads.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            up = float(build().data.reshape(-1)[0])
            flat[i] = saved - step
            down = float(build().data.reshape(-1)[0])
            flat[i] = saved
            numeric = (up - down) / (2.0 * step)
            err = abs(gflat[i] - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst


def perturbed_away_from_kinks(rng, shape, margin: float = 1e-3) -> np.ndarray:
    """Sample values whose magnitude stays outside `margin` of zero, so that
    piecewise-linear ops are finite-differenced away from their kinks."""
    x = rng.uniform(-1.0, 1.0, size=shape)
    bumped = np.where(x >= 0, x + margin, x - margin)
    return np.asarray(bumped, dtype=np.float64)
