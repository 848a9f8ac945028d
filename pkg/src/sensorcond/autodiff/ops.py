"""Differentiable primitives.

Only the operations the conditioned recurrent models need are provided; in
particular broadcasting is limited to the two shapes that actually occur
(same-shape elementwise, and matrix + bias row). All forward math is plain
numpy on float64; backward closures capture whatever the gradient needs.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError, EmptySetError
from .kernels import recurrent as _rk
from .tensor import Tensor, record


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# elementwise arithmetic ----------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    A, B = a.data, b.data
    if A.shape == B.shape:
        out = Tensor(A + B)

        def backward(g):
            if a.requires_grad:
                a.accumulate_grad(g)
            if b.requires_grad:
                b.accumulate_grad(g)

    elif A.ndim == 2 and B.ndim == 1 and A.shape[1] == B.shape[0]:
        # matrix + bias row
        out = Tensor(A + B)

        def backward(g):
            if a.requires_grad:
                a.accumulate_grad(g)
            if b.requires_grad:
                b.accumulate_grad(g.sum(axis=0))

    else:
        raise DimensionError(f"add shapes {A.shape} and {B.shape} are incompatible")
    return record(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    A, B = a.data, b.data
    if A.shape != B.shape:
        raise DimensionError(f"sub shapes {A.shape} and {B.shape} are incompatible")
    out = Tensor(A - B)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(-g)

    return record(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    A, B = a.data, b.data
    if A.shape != B.shape:
        raise DimensionError(f"mul shapes {A.shape} and {B.shape} are incompatible")
    out = Tensor(A * B)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * B)
        if b.requires_grad:
            b.accumulate_grad(g * A)

    return record(out, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = Tensor(a.data * s)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * s)

    return record(out, (a,), backward)


# linear algebra ------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    A, B = a.data, b.data
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimensionError(f"matmul shapes {A.shape} and {B.shape} are incompatible")
    out = Tensor(A @ B)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g @ B.T)
        if b.requires_grad:
            b.accumulate_grad(A.T @ g)

    return record(out, (a, b), backward)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the trailing axis; all leading axes must match."""
    A, B = a.data, b.data
    if A.ndim != B.ndim or A.shape[:-1] != B.shape[:-1]:
        raise DimensionError(f"concat shapes {A.shape} and {B.shape} disagree off the trailing axis")
    out = Tensor(np.concatenate([A, B], axis=-1))
    p = A.shape[-1]

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g[..., :p])
        if b.requires_grad:
            b.accumulate_grad(g[..., p:])

    return record(out, (a, b), backward)


def take_rows(x: Tensor, idx) -> Tensor:
    """Gather rows of a matrix. Duplicate indices are allowed; their
    gradients accumulate into the same source row."""
    idx = np.asarray(idx, dtype=np.intp)
    if x.data.ndim != 2:
        raise DimensionError(f"take_rows expects a matrix, got shape {x.data.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise DimensionError(f"row index out of range for shape {x.data.shape}")
    out = Tensor(x.data[idx])

    def backward(g):
        if x.requires_grad:
            np.add.at(x.ensure_grad(), idx, g)

    return record(out, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.data.shape))

    return record(out, (x,), backward)


def last_step(x: Tensor) -> Tensor:
    """[T, B, H] -> [B, H], the final step of a stacked sequence."""
    if x.data.ndim != 3:
        raise DimensionError(f"last_step expects [T, B, H], got shape {x.data.shape}")
    out = Tensor(x.data[-1])

    def backward(g):
        if x.requires_grad:
            x.ensure_grad()[-1] += g

    return record(out, (x,), backward)


# activations ---------------------------------------------------------------

def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise ConfigError(f"leaky_relu slope must be in (0, 1), got {slope}")
    X = x.data
    pos = X > 0
    out = Tensor(np.where(pos, X, slope * X))

    def backward(g):
        if x.requires_grad:
            # derivative at exactly zero is defined as `slope`
            x.accumulate_grad(g * np.where(pos, 1.0, slope))

    return record(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    X = x.data
    pos = X > 0
    out = Tensor(np.where(pos, X, 0.0))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * pos)

    return record(out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    X = x.data
    pos = X >= 0
    e = np.exp(np.where(pos, -X, X))  # argument is always <= 0: no overflow
    out_data = np.where(pos, 1.0 / (1.0 + e), e / (1.0 + e))
    out = Tensor(out_data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * out_data * (1.0 - out_data))

    return record(out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)
    out = Tensor(out_data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * (1.0 - out_data * out_data))

    return record(out, (x,), backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the trailing axis, computed with max-subtraction."""
    X = x.data
    shifted = X - X.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(out_data)

    def backward(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=-1, keepdims=True)
            x.accumulate_grad(out_data * (g - inner))

    return record(out, (x,), backward)


def dropout(x: Tensor, rate: float, training: bool, rng) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate) so that
    inference mode is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs an rng stream")
    keep = rng.uniform(size=x.data.shape) >= rate
    mask = keep / (1.0 - rate)
    out = Tensor(x.data * mask)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask)

    return record(out, (x,), backward)


# reductions ------------------------------------------------------------------

def rowwise_max(x: Tensor) -> Tensor:
    """[n, d] -> [d], per-column maximum. Ties route the gradient to the
    lowest row index attaining the maximum."""
    X = x.data
    if X.ndim != 2:
        raise DimensionError(f"rowwise_max expects a matrix, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptySetError("rowwise_max over zero rows: the active set may not be empty")
    winners = np.argmax(X, axis=0)  # first occurrence = lowest row index
    cols = np.arange(X.shape[1])
    out = Tensor(X[winners, cols])

    def backward(g):
        if x.requires_grad:
            buf = x.ensure_grad()
            np.add.at(buf, (winners, cols), g)

    return record(out, (x,), backward)


def reduce_sum_rows(x: Tensor) -> Tensor:
    """[n, d] -> [d], column sums; n = 0 yields the zero vector."""
    X = x.data
    if X.ndim != 2:
        raise DimensionError(f"reduce_sum_rows expects a matrix, got shape {X.shape}")
    out = Tensor(X.sum(axis=0))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(g, X.shape))

    return record(out, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.sum(x.data))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(g, x.data.shape))

    return record(out, (x,), backward)


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / x.data.size)


def log_clamped(x: Tensor, floor: float = 1e-12) -> Tensor:
    """log(max(x, floor)); gradient is zero below the floor."""
    X = x.data
    above = X > floor
    out = Tensor(np.log(np.maximum(X, floor)))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.where(above, g / np.maximum(X, floor), 0.0))

    return record(out, (x,), backward)


# recurrent kernel ------------------------------------------------------------

def gru_layer(x_seq: Tensor, cond, h0: Tensor,
              wz: Tensor, wr: Tensor, wh: Tensor,
              bz: Tensor, br: Tensor, bh: Tensor) -> Tensor:
    """One recurrent layer over a whole sequence: [T, B, Dx] -> [T, B, H].

    `cond`, when given, is a conditioning vector of width Dc appended to the
    input of every timestep; its gradient accumulates over all steps and
    batch rows. The heavy lifting runs in the selected kernel backend.
    """
    X = x_seq.data
    if X.ndim != 3:
        raise DimensionError(f"gru_layer expects [T, B, Dx], got shape {X.shape}")
    C = None
    if cond is not None:
        if cond.data.ndim != 1:
            raise DimensionError(f"conditioning vector must be 1-d, got shape {cond.data.shape}")
        C = cond.data
    H = h0.data.shape[-1]
    din = X.shape[2] + (C.shape[0] if C is not None else 0)
    if wz.data.shape != (din + H, H):
        raise DimensionError(
            f"gate weights shaped {wz.data.shape}, expected {(din + H, H)} "
            f"for input width {din} and {H} hidden units")

    h_seq, cache = _rk.gru_layer_forward(
        X, C, h0.data, wz.data, wr.data, wh.data, bz.data, br.data, bh.data)
    out = Tensor(h_seq)

    def backward(g):
        need_dx = x_seq.requires_grad
        dx, dc, dh0, dwz, dwr, dwh, dbz, dbr, dbh = _rk.gru_layer_backward(
            cache, wz.data, wr.data, wh.data, np.ascontiguousarray(g), need_dx)
        if need_dx:
            x_seq.accumulate_grad(dx)
        if cond is not None and cond.requires_grad:
            cond.accumulate_grad(dc)
        if h0.requires_grad:
            h0.accumulate_grad(dh0)
        for t, d in ((wz, dwz), (wr, dwr), (wh, dwh), (bz, dbz), (br, dbr), (bh, dbh)):
            if t.requires_grad:
                t.accumulate_grad(d)

    inputs = (x_seq, h0, wz, wr, wh, bz, br, bh) + ((cond,) if cond is not None else ())
    return record(out, inputs, backward)
