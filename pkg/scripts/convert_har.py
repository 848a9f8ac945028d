"""Convert the UCI smartphone activity dataset to a manifest directory.

Offline tool: download and unzip "UCI HAR Dataset" (the smartphone
recordings with raw Inertial Signals), then:

    python scripts/convert_har.py --source "UCI HAR Dataset" --out data/har

Each instance is one 128-sample window over 9 raw signals (body and total
acceleration plus gyroscope, x/y/z). The official train/test partition is
ignored: all 10299 instances are pooled and re-split 40/10/10/40 at the
instance level with the given seed. Expect d=9, K=6, N=10299.
"""

import argparse
from pathlib import Path

import numpy as np

from sensorcond.autodiff import RngStream
from sensorcond.data import (Dataset, TaskSpec, TimeSeriesInstance,
                             bundle_digest, save_dataset, split)
from sensorcond.sensors import ActiveSet, SensorCatalog

SIGNALS = [
    "body_acc_x", "body_acc_y", "body_acc_z",
    "body_gyro_x", "body_gyro_y", "body_gyro_z",
    "total_acc_x", "total_acc_y", "total_acc_z",
]


def load_half(root: Path, part: str):
    sig_dir = root / part / "Inertial Signals"
    channels = [np.loadtxt(sig_dir / f"{name}_{part}.txt") for name in SIGNALS]
    labels = np.loadtxt(root / part / f"y_{part}.txt", dtype=int) - 1
    values = np.stack(channels, axis=2)  # [N, 128, 9]
    return values, labels


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--source", required=True, help="path to 'UCI HAR Dataset'")
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    root = Path(args.source)
    xs, ys = [], []
    for part in ("train", "test"):
        values, labels = load_half(root, part)
        xs.append(values)
        ys.append(labels)
    values = np.concatenate(xs)
    labels = np.concatenate(ys)

    catalog = SensorCatalog(SIGNALS)
    full = ActiveSet.full(len(SIGNALS))
    instances = [
        TimeSeriesInstance(id=f"har-{i:05d}", values=values[i], active=full,
                           target=int(labels[i]), source="har")
        for i in range(values.shape[0])
    ]
    ds = Dataset(catalog=catalog, task=TaskSpec("classification", 6),
                 instances=instances, normalization="zscore")
    print(f"loaded d={catalog.size} K=6 N={len(instances)}")

    train, val, finetune, test = split(ds, rng=RngStream(args.seed).split("split"))
    splits = {"train": train, "val": val, "finetune": finetune, "test": test}
    save_dataset(splits, args.out)
    print(f"wrote {args.out}; data digest {bundle_digest(splits):016x}")


if __name__ == "__main__":
    main()
