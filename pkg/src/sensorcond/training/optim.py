"""Dual-optimizer update rule.

Embedding rows are updated with plain gradient descent (no state), so rows
whose gradient is exactly zero stay bit-identical; in particular the rows of
sensors outside the current batch's active set never move. Every other
parameter uses bias-corrected adaptive moments, whose momentum is harmless
there because those weights are shared across all sensor combinations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EMBED_LR = 5e-4
NET_LR = 1e-4
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def sgd_step(param: np.ndarray, grad: np.ndarray, lr: float = EMBED_LR) -> None:
    """In-place vanilla gradient descent, no momentum."""
    param -= lr * grad


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = NET_LR) -> None:
    """One bias-corrected adaptive-moment step over `params` (key -> array),
    applied in place. Moment buffers are created lazily per key."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correct1 = 1.0 - b1 ** state.t
    correct2 = 1.0 - b2 ** state.t
    for key, p in params.items():
        g = grads[key]
        m = state.m.get(key)
        if m is None:
            m = state.m[key] = np.zeros_like(p)
        v = state.v.get(key)
        if v is None:
            v = state.v[key] = np.zeros_like(p)
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        p -= lr * (m / correct1) / (np.sqrt(v / correct2) + state.eps)


class DualOptimizer:
    """Routes embedding parameters to SGD and the rest to Adam, keyed by the
    model's parameter paths."""

    def __init__(self, embed_lr: float = EMBED_LR, net_lr: float = NET_LR):
        self.embed_lr = embed_lr
        self.net_lr = net_lr
        self.adam = AdamState()

    @staticmethod
    def is_embedding(key: str) -> bool:
        return key.startswith("embeddings.")

    def step(self, params: dict) -> None:
        """`params` is the model's path -> Tensor map; tensors without a
        gradient (never touched by the loss) are left untouched."""
        net_params, net_grads = {}, {}
        for key, tensor in params.items():
            if tensor.grad is None:
                continue
            if self.is_embedding(key):
                sgd_step(tensor.data, tensor.grad, self.embed_lr)
            else:
                net_params[key] = tensor.data
                net_grads[key] = tensor.grad
        if net_params:
            adam_step(net_params, net_grads, self.adam, self.net_lr)

    @staticmethod
    def zero_grads(params: dict) -> None:
        for tensor in params.values():
            tensor.grad = None
