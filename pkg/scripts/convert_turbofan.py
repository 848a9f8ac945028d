"""Convert the FD002 turbofan degradation set to a manifest directory.

Offline tool: download the engine-degradation simulation archive and point
--source at the directory holding train_FD002.txt, test_FD002.txt, and
RUL_FD002.txt:

    python scripts/convert_turbofan.py --source data/raw_cmapss --out data/turbofan

Each engine becomes one run-to-failure instance over the 21 sensor columns
(operating-condition settings are dropped by default; keep them as three
extra always-available columns with --include-settings). Engines are pooled
across the official train/test files, re-split 40/10/10/40 at the engine
level, and every split is then cut into overlapping windows of length 100
with shift 5; shorter engines are dropped. Expect d=21 and 519 engines
before windowing.
"""

import argparse
from pathlib import Path

import numpy as np

from sensorcond.autodiff import RngStream
from sensorcond.data import (Dataset, TaskSpec, TimeSeriesInstance,
                             bundle_digest, save_dataset, split,
                             window_dataset)
from sensorcond.sensors import ActiveSet, SensorCatalog


def load_engines(path: Path, rul_path: Path | None, tag: str, include_settings: bool):
    raw = np.loadtxt(path)
    unit_ids = raw[:, 0].astype(int)
    ruls = None
    if rul_path is not None:
        ruls = np.loadtxt(rul_path).astype(int).reshape(-1)
    out = []
    for unit in np.unique(unit_ids):
        rows = raw[unit_ids == unit]
        rows = rows[np.argsort(rows[:, 1])]
        values = rows[:, 2:] if include_settings else rows[:, 5:]
        observed = values.shape[0]
        extra = int(ruls[unit - 1]) if ruls is not None else 0
        out.append((f"{tag}-{unit:03d}", values, observed + extra, extra))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--source", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--include-settings", action="store_true",
                    help="keep the 3 operating-condition columns as sensors")
    ap.add_argument("--window-length", type=int, default=100)
    ap.add_argument("--window-shift", type=int, default=5)
    args = ap.parse_args()

    src = Path(args.source)
    engines = load_engines(src / "train_FD002.txt", None, "train", args.include_settings)
    engines += load_engines(src / "test_FD002.txt", src / "RUL_FD002.txt", "test",
                            args.include_settings)

    n_sensors = engines[0][1].shape[1]
    names = ([f"setting_{i}" for i in range(1, 4)] if args.include_settings else [])
    names += [f"sensor_{i:02d}" for i in range(1, n_sensors - len(names) + 1)]
    catalog = SensorCatalog(names)
    full = ActiveSet.full(len(names))

    instances = [
        TimeSeriesInstance(id=eid, values=values, active=full,
                           target=float(rul), total_life=total, source="turbofan")
        for eid, values, total, rul in engines
    ]
    ds = Dataset(catalog=catalog, task=TaskSpec("regression"),
                 instances=instances, normalization="minmax")
    print(f"loaded d={catalog.size} engines={len(instances)}")

    train, val, finetune, test = split(ds, rng=RngStream(args.seed).split("split"))
    splits = {
        name: window_dataset(part, args.window_length, args.window_shift)
        for name, part in (("train", train), ("val", val),
                           ("finetune", finetune), ("test", test))
    }
    counts = ", ".join(f"{k}={len(v)}" for k, v in splits.items())
    print(f"windows: {counts}")
    save_dataset(splits, args.out)
    print(f"wrote {args.out}; data digest {bundle_digest(splits):016x}")


if __name__ == "__main__":
    main()
