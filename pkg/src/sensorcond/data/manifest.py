"""Dataset directory format.

A dataset directory holds `manifest.json` (catalog order, task, class
count, normalization policy, split file names) and one JSON-lines record
file per split. Each record is {id, active: [sensor names], target,
values: [[row per timestep]]} with raw, pre-normalization values, plus
optional total_life for prognostics data.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import IngestionError
from ..sensors import ActiveSet, SensorCatalog
from .core import Dataset, TaskSpec, TimeSeriesInstance

FORMAT_VERSION = 1


def save_dataset(data, path) -> None:
    """Write a dataset directory. `data` is a Dataset (stored as a single
    split named "all") or a {split_name: Dataset} mapping."""
    splits = {"all": data} if isinstance(data, Dataset) else dict(data)
    if not splits:
        raise IngestionError("nothing to save: empty split mapping")
    first = next(iter(splits.values()))
    for name, ds in splits.items():
        if ds.catalog != first.catalog or ds.task != first.task:
            raise IngestionError(f"split {name!r} disagrees with the others on catalog or task")

    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "sensors": list(first.catalog.names),
        "task": first.task.kind,
        "num_classes": first.task.num_classes,
        "normalization": first.normalization,
        "splits": {name: f"{name}.jsonl" for name in splits},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for name, ds in splits.items():
        with open(root / f"{name}.jsonl", "w") as fh:
            for inst in ds.instances:
                rec = {
                    "id": inst.id,
                    "active": inst.active.names(ds.catalog),
                    "target": inst.target,
                    "values": inst.values.tolist(),
                }
                if inst.total_life is not None:
                    rec["total_life"] = inst.total_life
                fh.write(json.dumps(rec) + "\n")


def _parse_record(line: str, where: str, catalog: SensorCatalog, task: TaskSpec,
                  source: str) -> TimeSeriesInstance:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{where}: invalid JSON ({exc})") from exc
    for key in ("id", "active", "target", "values"):
        if key not in rec:
            raise IngestionError(f"{where}: record is missing {key!r}")
    values = np.asarray(rec["values"], dtype=np.float64)
    if values.ndim != 2:
        raise IngestionError(f"{where}: values must be a [T, d] matrix")
    if values.shape[1] != catalog.size:
        raise IngestionError(
            f"{where}: record has {values.shape[1]} columns, catalog has {catalog.size}")
    try:
        active = ActiveSet.from_names(catalog, rec["active"])
    except KeyError as exc:
        raise IngestionError(f"{where}: unknown sensor name {exc}") from exc
    target = rec["target"]
    if task.kind == "classification":
        target = int(target)
        if not 0 <= target < task.num_classes:
            raise IngestionError(f"{where}: class {target} out of range")
    else:
        target = float(target)
    return TimeSeriesInstance(
        id=str(rec["id"]), values=values, active=active, target=target,
        total_life=rec.get("total_life"), source=source)


def load_dataset(path, split: str | None = None):
    """Load a dataset directory.

    Returns {split_name: Dataset} when `split` is None, otherwise the one
    requested Dataset. Malformed input raises IngestionError naming the
    offending file and line.
    """
    root = Path(path)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise IngestionError(f"{mpath}: manifest not found")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{mpath}: invalid JSON ({exc})") from exc
    for key in ("sensors", "task", "splits"):
        if key not in manifest:
            raise IngestionError(f"{mpath}: manifest is missing {key!r}")

    catalog = SensorCatalog(manifest["sensors"])
    task = TaskSpec(manifest["task"], manifest.get("num_classes"))
    normalization = manifest.get("normalization", "zscore")

    wanted = manifest["splits"] if split is None else {split: manifest["splits"].get(split)}
    if split is not None and wanted[split] is None:
        raise IngestionError(f"{mpath}: no split named {split!r}")

    out = {}
    for name, fname in wanted.items():
        fpath = root / fname
        if not fpath.exists():
            raise IngestionError(f"{fpath}: split file not found")
        instances = []
        with open(fpath) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                instances.append(_parse_record(line, f"{fpath}:{lineno}", catalog, task, name))
        out[name] = Dataset(catalog=catalog, task=task, instances=instances,
                            normalization=normalization)
    return out if split is None else out[split]
