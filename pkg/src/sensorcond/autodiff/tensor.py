"""Reverse-mode tape over 64-bit numpy arrays.

The graph is define-by-run: operations executed while a Tape is active are
appended to it in execution order, which is already a topological order, so
the backward pass is a single reverse sweep. Tensors are immutable once
created; a tape is single-owner and must not be shared between threads.
"""

from __future__ import annotations

import threading

import numpy as np

from ..errors import ContractError

_local = threading.local()


def _stack() -> list:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = []
        _local.tapes = stack
    return stack


def active_tape():
    """The innermost Tape on this thread, or None outside any tape context."""
    stack = _stack()
    return stack[-1] if stack else None


class Tensor:
    """An n-d float64 value, optionally carrying gradient state."""

    __slots__ = ("data", "grad", "requires_grad", "_inputs", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        # asarray with order="C" keeps 0-d scalars 0-d (ascontiguousarray
        # would promote them to 1-d)
        self.data = np.asarray(data, dtype=np.float64, order="C")
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._inputs = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def accumulate_grad(self, g: np.ndarray) -> None:
        self.ensure_grad()
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def parameter(data) -> Tensor:
    """A learnable leaf tensor."""
    return Tensor(data, requires_grad=True)


def record(out: Tensor, inputs: tuple, backward) -> Tensor:
    """Register `out` on the active tape if any input participates in grads.

    Outside a tape context (inference, finite differencing) this is a no-op,
    so forward-only evaluation carries no bookkeeping cost.
    """
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        if tape._spent:
            raise ContractError("tape already consumed by backward(); build a fresh tape")
        out.requires_grad = True
        out._inputs = inputs
        out._backward = backward
        tape._nodes.append(out)
    return out


class Tape:
    """Ordered record of one forward pass; consumed by a single backward()."""

    def __init__(self):
        self._nodes: list[Tensor] = []
        self._spent = False

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _stack().pop()
        assert popped is self, "tape contexts must nest properly"
        return False

    def __len__(self):
        return len(self._nodes)

    def backward(self, loss: Tensor, params=None) -> None:
        """Accumulate d(loss)/d(node) for every node reachable from `loss`.

        `params`, when given, is an iterable of leaf tensors whose .grad is
        guaranteed non-None afterwards; parameters never touched by the loss
        end up with an exactly-zero gradient of matching shape.
        """
        if self._spent:
            raise ContractError("backward() was already called on this tape")
        if loss.data.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")
        self._spent = True
        loss.ensure_grad()
        loss.grad += np.ones_like(loss.data)
        for node in reversed(self._nodes):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)
        if params is not None:
            for p in params:
                p.ensure_grad()
