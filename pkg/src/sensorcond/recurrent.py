"""Core dynamics: stacked GRU over the imputed series plus an output head.

The conditioning vector, when present, is appended to the input of the
first layer at every timestep; layers above consume the layer below. Only
the final top-layer state feeds the head.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, ops, parameter
from .errors import DimensionError, EmptySequenceError

DEFAULT_HIDDEN = 128
DEFAULT_LAYERS = 3


class GruLayerParams:
    """Per-gate weights [(input+hidden) x hidden] and biases for one layer."""

    __slots__ = ("wz", "wr", "wh", "bz", "br", "bh")

    def __init__(self, wz, wr, wh, bz, br, bh):
        self.wz, self.wr, self.wh = wz, wr, wh
        self.bz, self.br, self.bh = bz, br, bh

    @classmethod
    def init(cls, in_width: int, hidden: int, rng) -> "GruLayerParams":
        bound = 1.0 / np.sqrt(hidden)

        def w(label):
            return parameter(rng.split(label).uniform(-bound, bound, size=(in_width + hidden, hidden)))

        return cls(w("wz"), w("wr"), w("wh"),
                   parameter(np.zeros(hidden)), parameter(np.zeros(hidden)),
                   parameter(np.zeros(hidden)))

    def tensors(self):
        return {"wz": self.wz, "wr": self.wr, "wh": self.wh,
                "bz": self.bz, "br": self.br, "bh": self.bh}


class GruStack:
    """Stack of GRU layers; layer 1 sees the series (plus conditioning),
    each higher layer sees the hidden sequence below it."""

    def __init__(self, layers: list, input_width: int, hidden: int):
        self.layers = layers
        self.input_width = input_width
        self.hidden = hidden

    @classmethod
    def init(cls, input_width: int, hidden: int, depth: int, rng) -> "GruStack":
        layers = []
        for i in range(depth):
            w_in = input_width if i == 0 else hidden
            layers.append(GruLayerParams.init(w_in, hidden, rng.split(f"layer{i}")))
        return cls(layers, input_width, hidden)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def tensors(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for k, t in layer.tensors().items():
                out[f"l{i}.{k}"] = t
        return out


class HiddenState:
    """Per-layer hidden vectors, zero-initialised at t = 0."""

    def __init__(self, values: list):
        self.values = values

    @classmethod
    def zeros(cls, stack: GruStack, batch: int = 1) -> "HiddenState":
        return cls([Tensor(np.zeros((batch, stack.hidden))) for _ in stack.layers])

    def top(self) -> Tensor:
        return self.values[-1]


def gru_step(inp: Tensor, state: HiddenState, stack: GruStack) -> HiddenState:
    """Advance the whole stack by one timestep.

    `inp` is the already-assembled step input (series features plus
    conditioning), 1-d [din] or batched [B, din].
    """
    x = inp if inp.data.ndim == 2 else ops.reshape(inp, (1, inp.data.shape[0]))
    if x.data.shape[1] != stack.input_width:
        raise DimensionError(
            f"step input width {x.data.shape[1]} does not match stack input width {stack.input_width}")
    new_values = []
    for layer, h in zip(stack.layers, state.values):
        seq = ops.reshape(x, (1,) + x.data.shape)
        out = ops.gru_layer(seq, None, h, layer.wz, layer.wr, layer.wh,
                            layer.bz, layer.br, layer.bh)
        x = ops.last_step(out)
        new_values.append(x)
    return HiddenState(new_values)


class OutputHead:
    """One ReLU layer (with dropout in training) followed by a linear map
    and softmax (classification) or sigmoid (regression)."""

    def __init__(self, w1, b1, w2, b2, kind: str, dropout_rate: float = 0.2):
        if kind not in ("classification", "regression"):
            raise DimensionError(f"unknown head kind {kind!r}")
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2
        self.kind = kind
        self.dropout_rate = dropout_rate

    @classmethod
    def init(cls, hidden: int, head_hidden: int, out_width: int, kind: str, rng,
             dropout_rate: float = 0.2) -> "OutputHead":
        b1 = 1.0 / np.sqrt(hidden)
        b2 = 1.0 / np.sqrt(head_hidden)
        return cls(
            parameter(rng.split("w1").uniform(-b1, b1, size=(hidden, head_hidden))),
            parameter(np.zeros(head_hidden)),
            parameter(rng.split("w2").uniform(-b2, b2, size=(head_hidden, out_width))),
            parameter(np.zeros(out_width)),
            kind, dropout_rate)

    def apply(self, feat: Tensor, training: bool = False, rng=None) -> Tensor:
        a = ops.relu(ops.add(ops.matmul(feat, self.w1), self.b1))
        a = ops.dropout(a, self.dropout_rate, training, rng)
        logits = ops.add(ops.matmul(a, self.w2), self.b2)
        if self.kind == "classification":
            return ops.softmax(logits)
        return ops.sigmoid(logits)

    def tensors(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def forward_batch(values, cond, stack: GruStack, head: OutputHead,
                  training: bool = False, rng=None) -> Tensor:
    """Run a homogeneous batch end to end.

    values: [B, T, d] array (a constant input, not differentiated);
    cond: conditioning Tensor [dc] shared by the whole batch, or None.
    Returns class probabilities [B, K] or sigmoid outputs [B, 1].
    """
    arr = values.data if isinstance(values, Tensor) else np.asarray(values, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"batch values must be [B, T, d], got {arr.shape}")
    if arr.shape[1] == 0:
        raise EmptySequenceError("cannot run a zero-length sequence")
    x = Tensor(np.ascontiguousarray(arr.transpose(1, 0, 2)))  # [T, B, d]
    batch = arr.shape[0]
    h0 = Tensor(np.zeros((batch, stack.hidden)))
    seq = x
    for i, layer in enumerate(stack.layers):
        seq = ops.gru_layer(seq, cond if i == 0 else None, h0,
                            layer.wz, layer.wr, layer.wh, layer.bz, layer.br, layer.bh)
    feat = ops.last_step(seq)
    return head.apply(feat, training, rng)


def forward_sequence(series, cond, stack: GruStack, head: OutputHead,
                     training: bool = False, rng=None) -> Tensor:
    """Single-instance forward: series [T, d] -> probabilities [K] or a
    scalar in (0, 1) for regression."""
    arr = series.data if isinstance(series, Tensor) else np.asarray(series, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"series must be [T, d], got {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptySequenceError("cannot run a zero-length sequence")
    out = forward_batch(arr[None, :, :], cond, stack, head, training, rng)
    if head.kind == "classification":
        return ops.reshape(out, (out.data.shape[1],))
    return ops.reshape(out, ())


def predict_label(probs) -> int:
    """Argmax with lowest-index tie-break."""
    arr = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    return int(np.argmax(arr))


def denormalize_rul(value: float, lo: float, hi: float) -> float:
    """Map a (0, 1) model output back to original target units."""
    return float(value) * (hi - lo) + lo
