"""Conditioning on the available sensor combination.

Every sensor owns a learnable embedding vector. For a given active set, the
active embeddings exchange messages over a fully-connected graph (one round,
no self-loops, both directions of every pair evaluated separately), each
node is updated from its own vector plus the summed incoming messages, and
the updated vectors are pooled with a dimension-wise max into a single
conditioning vector. A cheaper ablation pools the raw embeddings directly.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, ops, parameter
from .errors import DimensionError, EmptySetError
from .sensors import ActiveSet

DEFAULT_LEAKY_SLOPE = 0.01
DEFAULT_DROPOUT = 0.2


class EmbeddingTable:
    """One learnable row per sensor in catalog order."""

    def __init__(self, vectors: Tensor):
        if vectors.data.ndim != 2:
            raise DimensionError(f"embedding table must be 2-d, got {vectors.data.shape}")
        self.vectors = vectors

    @classmethod
    def init(cls, count: int, width: int, rng) -> "EmbeddingTable":
        # uniform(-1/sqrt(width), +1/sqrt(width)) keeps first messages O(1)
        bound = 1.0 / np.sqrt(width)
        return cls(parameter(rng.uniform(-bound, bound, size=(count, width))))

    @property
    def count(self) -> int:
        return self.vectors.data.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.data.shape[1]


def default_embed_width(catalog_size: int) -> int:
    """Embedding and conditioning width: half the sensor count, floored."""
    return max(1, catalog_size // 2)


class _TwoLayerNet:
    """Feed-forward block of two leaky-ReLU layers with dropout after each."""

    def __init__(self, w1, b1, w2, b2):
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2

    @classmethod
    def init(cls, in_width: int, hidden: int, out_width: int, rng) -> "_TwoLayerNet":
        b1 = 1.0 / np.sqrt(in_width)
        b2 = 1.0 / np.sqrt(hidden)
        return cls(
            parameter(rng.uniform(-b1, b1, size=(in_width, hidden))),
            parameter(np.zeros(hidden)),
            parameter(rng.uniform(-b2, b2, size=(hidden, out_width))),
            parameter(np.zeros(out_width)),
        )

    def apply(self, x: Tensor, slope: float, rate: float, training: bool, rng) -> Tensor:
        h = ops.leaky_relu(ops.add(ops.matmul(x, self.w1), self.b1), slope)
        h = ops.dropout(h, rate, training, rng)
        h = ops.leaky_relu(ops.add(ops.matmul(h, self.w2), self.b2), slope)
        return ops.dropout(h, rate, training, rng)

    def tensors(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


class ConditioningNet:
    """Edge and node networks of the message-passing round.

    Both take a concatenation of two embedding-width vectors, so their input
    width is exactly twice the embedding width.
    """

    def __init__(self, edge: _TwoLayerNet, node: _TwoLayerNet,
                 dropout_rate: float = DEFAULT_DROPOUT,
                 leaky_slope: float = DEFAULT_LEAKY_SLOPE):
        self.edge = edge
        self.node = node
        self.dropout_rate = dropout_rate
        self.leaky_slope = leaky_slope

    @classmethod
    def init(cls, embed_width: int, rng,
             dropout_rate: float = DEFAULT_DROPOUT,
             leaky_slope: float = DEFAULT_LEAKY_SLOPE) -> "ConditioningNet":
        return cls(
            _TwoLayerNet.init(2 * embed_width, embed_width, embed_width, rng.split("edge")),
            _TwoLayerNet.init(2 * embed_width, embed_width, embed_width, rng.split("node")),
            dropout_rate=dropout_rate,
            leaky_slope=leaky_slope,
        )

    def apply_edge(self, pairs: Tensor, training: bool = False, rng=None) -> Tensor:
        return self.edge.apply(pairs, self.leaky_slope, self.dropout_rate, training, rng)

    def apply_node(self, rows: Tensor, training: bool = False, rng=None) -> Tensor:
        return self.node.apply(rows, self.leaky_slope, self.dropout_rate, training, rng)

    def tensors(self):
        out = {}
        for prefix, net in (("edge", self.edge), ("node", self.node)):
            for k, t in net.tensors().items():
                out[f"{prefix}.{k}"] = t
        return out


def _rows(v) -> Tensor:
    """Promote a 1-d tensor to a single-row matrix."""
    if v.data.ndim == 1:
        return ops.reshape(v, (1, v.data.shape[0]))
    return v


def edge_message(v_k: Tensor, v_l: Tensor, net: ConditioningNet,
                 training: bool = False, rng=None) -> Tensor:
    """Message sent to receiver k from sender l; concatenation order is
    [receiver, sender], so the two directions of a pair differ in general."""
    if v_k.data.shape != v_l.data.shape:
        raise DimensionError(
            f"edge_message operands disagree: {v_k.data.shape} vs {v_l.data.shape}")
    squeeze = v_k.data.ndim == 1
    out = net.apply_edge(ops.concat(_rows(v_k), _rows(v_l)), training, rng)
    return ops.reshape(out, (out.data.shape[-1],)) if squeeze else out


def node_update(v_k: Tensor, messages: Tensor, net: ConditioningNet,
                training: bool = False, rng=None) -> Tensor:
    """Update one node from the sum of its incoming messages ([m, width],
    m may be zero for an isolated node)."""
    agg = ops.reduce_sum_rows(messages)
    squeeze = v_k.data.ndim == 1
    joined = ops.concat(_rows(v_k), _rows(agg))
    out = net.apply_node(joined, training, rng)
    return ops.reshape(out, (out.data.shape[-1],)) if squeeze else out


def conditioning_vector(active: ActiveSet, table: EmbeddingTable, net: ConditioningNet,
                        training: bool = False, rng=None) -> Tensor:
    """Summarise an active sensor set into one embedding-width vector.

    All directed pairs among the active sensors are evaluated in a single
    batched pass through the edge network; per-receiver sums are realised as
    a constant 0/1 matrix product so the whole round is a handful of tape
    nodes regardless of the set size. Inactive rows of the table are never
    gathered, so they stay outside the tape entirely.
    """
    if active.count == 0:
        raise EmptySetError("conditioning requires a nonempty active set")
    idx = active.indices
    n = idx.shape[0]
    own = ops.take_rows(table.vectors, idx)

    if n == 1:
        agg = Tensor(np.zeros((1, table.width)))
    else:
        rec, snd = np.nonzero(~np.eye(n, dtype=bool))
        receivers = ops.take_rows(table.vectors, idx[rec])
        senders = ops.take_rows(table.vectors, idx[snd])
        messages = net.apply_edge(ops.concat(receivers, senders), training, rng)
        gather = np.zeros((n, rec.shape[0]))
        gather[rec, np.arange(rec.shape[0])] = 1.0
        agg = ops.matmul(Tensor(gather), messages)

    updated = net.apply_node(ops.concat(own, agg), training, rng)
    return ops.rowwise_max(updated)


def conditioning_vector_se(active: ActiveSet, table: EmbeddingTable) -> Tensor:
    """Ablation pooling: dimension-wise max over the raw active embeddings,
    with no message passing."""
    if active.count == 0:
        raise EmptySetError("conditioning requires a nonempty active set")
    return ops.rowwise_max(ops.take_rows(table.vectors, active.indices))
