"""Times the compiled recurrent kernel against the pure-numpy fallback.

Measures the raw kernel (forward and forward+backward) at a few realistic
shapes and one end-to-end training batch per backend. Run after building
the extension:

    python setup.py build_ext --inplace
    python benchmarks/compare_backends.py
"""

import time

import numpy as np

from sensorcond.autodiff import RngStream, Tape
from sensorcond.autodiff.kernels import _recurrent_py

try:
    from sensorcond.autodiff.kernels import _recurrent_cy
except ImportError:
    _recurrent_cy = None

SHAPES = [
    # (T, B, D, H) roughly: desk-scale grid cell, full-scale step, long window
    (32, 64, 18, 32),
    (32, 64, 18, 128),
    (100, 32, 27, 128),
]
REPEATS = 20


def time_kernel(backend, T, B, D, H):
    rng = RngStream(0)
    x = rng.normal(size=(T, B, D))
    h0 = np.zeros((B, H))
    ws = [rng.normal(scale=0.3, size=(D + H, H)) for _ in range(3)]
    bs = [np.zeros(H) for _ in range(3)]
    g = np.ascontiguousarray(rng.normal(size=(T, B, H)))

    def fwd():
        return backend.gru_layer_forward(x, None, h0, *ws, *bs)

    fwd()  # warm-up
    t0 = time.perf_counter()
    for _ in range(REPEATS):
        _, cache = fwd()
    fwd_s = (time.perf_counter() - t0) / REPEATS

    t0 = time.perf_counter()
    for _ in range(REPEATS):
        _, cache = fwd()
        backend.gru_layer_backward(cache, ws[0], ws[1], ws[2], g, False)
    both_s = (time.perf_counter() - t0) / REPEATS
    return fwd_s, both_s


def time_training_batch():
    """One end-to-end epoch (forward+backward+update) per selected backend."""
    from sensorcond.data import SynthConfig, compute_stats, make_batches, split, synth_generate
    from sensorcond.models import ModelConfig, build_model
    from sensorcond.training import DualOptimizer, batch_loss

    ds = synth_generate(SynthConfig(instances=200, length=32, seed=0))
    train_ds, _, _, _ = split(ds, rng=RngStream(0).split("split"))
    stats = compute_stats(train_ds)
    model = build_model(ModelConfig(variant="gru-cm", task="classification",
                                    num_classes=4, hidden=32, layers=2),
                        train_ds.catalog, RngStream(0).split("init"))
    params = model.parameters()
    opt = DualOptimizer()
    batches = list(make_batches(train_ds, None, None, stats, 64,
                                RngStream(1).split("b"), force_full=True))

    def step():
        for batch in batches:
            with Tape() as tape:
                loss = batch_loss(model, batch, training=True,
                                  rng=RngStream(2).split("d"))
                tape.backward(loss, params.values())
            opt.step(params)
            opt.zero_grads(params)

    step()
    t0 = time.perf_counter()
    for _ in range(5):
        step()
    return (time.perf_counter() - t0) / 5


def main():
    backends = [("python", _recurrent_py)]
    if _recurrent_cy is not None:
        backends.append(("compiled", _recurrent_cy))
    else:
        print("compiled extension not built; timing the fallback only\n")

    print(f"{'shape (T,B,D,H)':<22} {'backend':<10} {'forward':>10} {'fwd+bwd':>10}")
    speedups = []
    for shape in SHAPES:
        rows = {}
        for name, backend in backends:
            fwd_s, both_s = time_kernel(backend, *shape)
            rows[name] = both_s
            print(f"{str(shape):<22} {name:<10} {fwd_s * 1e3:>8.2f}ms {both_s * 1e3:>8.2f}ms")
        if len(rows) == 2:
            speedups.append(rows["python"] / rows["compiled"])
            print(f"{'':<22} {'speedup':<10} {'':>10} {speedups[-1]:>9.2f}x")

    print("\nend-to-end epoch (gru-cm, hidden 32, 2 layers, 80 instances):")
    import os
    import subprocess
    import sys
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    code = ("from benchmarks.compare_backends import time_training_batch; "
            "print(round(time_training_batch() * 1000, 1))")
    for name, _ in backends:
        # fresh interpreter so the import-time backend selection applies
        out = subprocess.run([sys.executable, "-c", code],
                             capture_output=True, text=True, cwd=root,
                             env={**os.environ, "SENSORCOND_KERNELS": name})
        if out.returncode == 0:
            print(f"  {name:<10} {out.stdout.strip()}ms per epoch")
        else:
            print(f"  {name:<10} failed: {out.stderr.strip()[:200]}")


if __name__ == "__main__":
    main()
