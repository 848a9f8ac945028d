"""Gradient verification suite.

Runs every differentiable primitive, the recurrent kernel, and the full
composed message-passing model against the central-difference oracle.
Shared by the `gradcheck` CLI command and the acceptance tests.
"""

from __future__ import annotations

import numpy as np

from .autodiff import RngStream, Tensor, grad_check, ops, parameter
from .autodiff.gradcheck import perturbed_away_from_kinks
from .conditioning import conditioning_vector
from .data import one_hot
from .models import ModelConfig, build_model
from .recurrent import forward_batch
from .sensors import ActiveSet, SensorCatalog
from .training.losses import cross_entropy

PRIMITIVE_TOL = 1e-6
COMPOSED_TOL = 1e-4


def _weighted(out: Tensor, rng) -> Tensor:
    """Random-coefficient contraction to a scalar, so gradients of
    normalized outputs (softmax) stay informative."""
    return ops.sum_all(ops.mul(out, Tensor(rng.normal(size=out.data.shape))))


def primitive_checks(seed: int = 0) -> list[dict]:
    """One finite-difference check per primitive; returns
    [{name, error, threshold}] entries."""
    rng = RngStream(seed).split("gradcheck")
    checks = []

    def run(name, build, params, tol=PRIMITIVE_TOL):
        checks.append({"name": name, "error": grad_check(build, params), "threshold": tol})

    a = parameter(rng.normal(size=(4, 5)))
    b = parameter(rng.normal(size=(5, 3)))
    run("matmul", lambda: ops.sum_all(ops.matmul(a, b)), [a, b])

    x = parameter(perturbed_away_from_kinks(rng, (3, 4)))
    run("leaky_relu", lambda: ops.sum_all(ops.leaky_relu(x, 0.01)), [x])
    run("relu", lambda: ops.sum_all(ops.relu(x)), [x])

    s = parameter(rng.normal(size=(2, 5)))
    wrng = rng.split("weights")
    run("sigmoid", lambda: _weighted(ops.sigmoid(s), wrng.clone()), [s])
    run("tanh", lambda: _weighted(ops.tanh(s), wrng.clone()), [s])

    sm = parameter(rng.normal(size=(6,)))
    run("softmax", lambda: _weighted(ops.softmax(sm), wrng.clone()), [sm])

    # distinct column maxima keep the max away from ties
    m = rng.normal(size=(5, 4))
    m += np.arange(5)[:, None] * np.arange(1, 5)[None, :] * 0.37
    mx = parameter(m)
    run("rowwise_max", lambda: _weighted(ops.rowwise_max(mx), wrng.clone()), [mx])
    run("reduce_sum_rows", lambda: _weighted(ops.reduce_sum_rows(mx), wrng.clone()), [mx])

    c1 = parameter(rng.normal(size=(3, 2)))
    c2 = parameter(rng.normal(size=(3, 4)))
    run("concat", lambda: _weighted(ops.concat(c1, c2), wrng.clone()), [c1, c2])

    g = parameter(rng.normal(size=(5, 3)))
    idx = np.array([0, 2, 2, 4, 1])
    run("take_rows", lambda: _weighted(ops.take_rows(g, idx), wrng.clone()), [g])

    bias = parameter(rng.normal(size=(4,)))
    mat = parameter(rng.normal(size=(3, 4)))
    run("add_bias", lambda: _weighted(ops.add(mat, bias), wrng.clone()), [mat, bias])

    u = parameter(rng.normal(size=(3, 3)))
    v = parameter(rng.normal(size=(3, 3)))
    run("mul", lambda: ops.sum_all(ops.mul(u, v)), [u, v])
    run("sub", lambda: ops.sum_all(ops.mul(ops.sub(u, v), ops.sub(u, v))), [u, v])
    run("scale", lambda: ops.sum_all(ops.scale(u, 2.5)), [u])

    pos = parameter(rng.uniform(0.1, 2.0, size=(3, 4)))
    run("log_clamped", lambda: ops.sum_all(ops.log_clamped(pos)), [pos])

    drop_in = parameter(rng.normal(size=(4, 6)))
    drop_rng = rng.split("dropout")
    run("dropout", lambda: ops.sum_all(ops.dropout(drop_in, 0.3, True, drop_rng.clone())),
        [drop_in])

    # recurrent kernel: one conditioned layer over a short sequence
    T, B, D, H, DC = 3, 2, 4, 5, 2
    krng = rng.split("gru")
    xs = Tensor(krng.normal(size=(T, B, D)))
    cond = parameter(krng.normal(size=(DC,)))
    h0 = Tensor(np.zeros((B, H)))
    ws = [parameter(krng.normal(scale=0.4, size=(D + DC + H, H))) for _ in range(3)]
    bs = [parameter(krng.normal(scale=0.1, size=(H,))) for _ in range(3)]

    def build_gru():
        out = ops.gru_layer(xs, cond, h0, ws[0], ws[1], ws[2], bs[0], bs[1], bs[2])
        return _weighted(ops.last_step(out), wrng.clone())

    run("gru_layer", build_gru, ws + bs + [cond])
    return checks


def composed_model_check(seed: int = 0, layers: int = 2) -> dict:
    """Finite-difference check of every parameter of a small end-to-end
    conditioned model: loss -> head -> recurrent stack -> message passing ->
    embeddings."""
    rng = RngStream(seed).split("composed")
    catalog = SensorCatalog([f"s{i}" for i in range(4)])
    config = ModelConfig(variant="gru-cm", task="classification", num_classes=3,
                         embed_width=2, hidden=8, layers=layers, dropout=0.0)
    model = build_model(config, catalog, rng.split("init"))
    active = ActiveSet.from_indices(4, [0, 2])
    values = rng.normal(size=(2, 3, 4))  # batch 2, T = 3
    targets = Tensor(one_hot(np.array([0, 2]), 3))

    def build():
        cond = conditioning_vector(active, model.embeddings, model.condnet,
                                   training=False)
        probs = forward_batch(values, cond, model.gru, model.head, training=False)
        return cross_entropy(probs, targets)

    error = grad_check(build, list(model.parameters().values()))
    return {"name": "composed gru-cm", "error": error, "threshold": COMPOSED_TOL}


def run_all(seed: int = 0) -> tuple[list[dict], bool]:
    """The whole suite; returns (results, all_passed)."""
    results = primitive_checks(seed)
    results.append(composed_model_check(seed))
    passed = all(r["error"] < r["threshold"] for r in results)
    return results, passed
