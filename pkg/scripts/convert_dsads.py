"""Convert the daily-and-sports-activities dataset to a manifest directory.

Offline tool: download the segmented recordings (directories a01..a19 for
the 19 activities, p1..p8 for the subjects, s01..s60 for the 5-second
segments, each a 125 x 45 text file), then:

    python scripts/convert_dsads.py --source data/raw_dsads --out data/dsads

Sensor columns are the 9 signals (acc/gyro/mag x/y/z) for each of the five
body sites (torso, right arm, left arm, right leg, left leg). All 9120
segments are pooled and re-split 40/10/10/40. Expect d=45, K=19, N=9120.
"""

import argparse
from pathlib import Path

import numpy as np

from sensorcond.autodiff import RngStream
from sensorcond.data import (Dataset, TaskSpec, TimeSeriesInstance,
                             bundle_digest, save_dataset, split)
from sensorcond.sensors import ActiveSet, SensorCatalog

SITES = ["torso", "right_arm", "left_arm", "right_leg", "left_leg"]
SIGNALS = ["acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z",
           "mag_x", "mag_y", "mag_z"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--source", required=True, help="directory holding a01..a19")
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    names = [f"{site}_{sig}" for site in SITES for sig in SIGNALS]
    catalog = SensorCatalog(names)
    full = ActiveSet.full(len(names))

    root = Path(args.source)
    instances = []
    for a in range(1, 20):
        for p in range(1, 9):
            seg_dir = root / f"a{a:02d}" / f"p{p}"
            for s in range(1, 61):
                path = seg_dir / f"s{s:02d}.txt"
                values = np.loadtxt(path, delimiter=",")
                if values.shape != (125, 45):
                    raise SystemExit(f"{path}: expected 125x45, got {values.shape}")
                instances.append(TimeSeriesInstance(
                    id=f"dsads-a{a:02d}-p{p}-s{s:02d}", values=values,
                    active=full, target=a - 1, source="dsads"))
    ds = Dataset(catalog=catalog, task=TaskSpec("classification", 19),
                 instances=instances, normalization="zscore")
    print(f"loaded d={catalog.size} K=19 N={len(instances)}")

    train, val, finetune, test = split(ds, rng=RngStream(args.seed).split("split"))
    splits = {"train": train, "val": val, "finetune": finetune, "test": test}
    save_dataset(splits, args.out)
    print(f"wrote {args.out}; data digest {bundle_digest(splits):016x}")


if __name__ == "__main__":
    main()
