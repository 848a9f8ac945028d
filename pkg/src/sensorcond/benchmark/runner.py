"""The benchmark grid: variants x masking fractions x modes x seeds.

Each (variant, f_tr, seed) cell trains once and is evaluated under every
requested mode; the all-sensors variant collapses the masking axes into a
single upper-bound cell per seed. Cells are independent jobs with disjoint
rng streams; completed cells leave a marker file, so an interrupted run
resumes without retraining and reproduces the same report digest.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..autodiff import RngStream
from ..data import Dataset, compute_stats, fnv1a64, generate_combinations
from ..errors import ConfigError
from ..models import ModelConfig
from ..training import TrainConfig, train, training_assignments
from .protocols import (EvalProtocol, fine_tune_eval, metric_name,
                        overlap_fine_tune_eval, sample_eval_combinations,
                        scratch_eval, zero_shot_eval)

log = logging.getLogger(__name__)

ALL_VARIANTS = ("gru", "gru-se", "gru-cm", "gru-a")

# Desk-scale presets: the grid ships with a model small enough to train the
# whole 4-variant multi-seed grid on a laptop CPU in tens of minutes, with
# learning rates rescaled to match. `train`'s library defaults stay at the
# full-scale values (128-unit, 3-layer core, 1e-4/5e-4 rates).
DESK_SCALE_MODEL = {"hidden": 32, "layers": 2}
DESK_SCALE_TRAIN = {"net_lr": 1e-3, "embed_lr": 5e-3}


@dataclass
class BenchConfig:
    dataset_name: str = "synthetic"
    variants: tuple = ALL_VARIANTS
    f_tr: tuple = (0.25, 0.4)
    seeds: tuple = (0, 1, 2, 3, 4)
    protocol: EvalProtocol = field(default_factory=EvalProtocol)
    model: dict = field(default_factory=dict)      # ModelConfig overrides
    train: dict = field(default_factory=dict)      # TrainConfig overrides
    plan_base: int = 16
    plan_total: int = 64
    outdir: str | None = None
    jobs: int = 1
    write_csv: bool = False

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name, "variants": list(self.variants),
            "f_tr": list(self.f_tr), "seeds": list(self.seeds),
            "protocol": {"f_te": list(self.protocol.f_te),
                         "combos_per_fte": self.protocol.combos_per_fte,
                         "modes": list(self.protocol.modes)},
            "model": self.model, "train": self.train,
            "plan_base": self.plan_base, "plan_total": self.plan_total,
            "jobs": self.jobs,
        }


@dataclass
class BenchReport:
    records: list
    config: dict
    digest: int
    data_digest: int
    failures: list = field(default_factory=list)

    def digest_hex(self) -> str:
        return f"{self.digest:016x}"


def cell_key(variant: str, f_tr: float, seed: int) -> str:
    return f"{variant}_f{f_tr:g}_s{seed}"


def enumerate_cells(config: BenchConfig) -> list:
    """All (variant, f_tr, seed) cells; gru-a collapses the f_tr axis."""
    cells = []
    for seed in config.seeds:
        for variant in config.variants:
            if variant == "gru-a":
                cells.append(("gru-a", 0.0, seed))
                continue
            for f_tr in config.f_tr:
                cells.append((variant, f_tr, seed))
    return cells


def _build_configs(config: BenchConfig, task, num_classes, variant, seed):
    model_kwargs = dict(variant=variant, task=task, num_classes=num_classes)
    model_kwargs.update(config.model)
    train_kwargs = dict(seed=seed)
    train_kwargs.update(config.train)
    return ModelConfig(**model_kwargs), TrainConfig(**train_kwargs)


def run_cell(variant: str, f_tr: float, seed: int, splits: dict,
             config: BenchConfig) -> dict:
    """Train one cell and evaluate every applicable mode.

    Returns {"records": aggregated rows, "detail": per-combination rows}.
    """
    train_ds, val_ds = splits["train"], splits["val"]
    finetune_ds, test_ds = splits["finetune"], splits["test"]
    task = train_ds.task
    stats = compute_stats(train_ds)
    model_cfg, train_cfg = _build_configs(config, task.kind, task.num_classes, variant, seed)

    plan = None
    combos = None
    if variant != "gru-a":
        plan = generate_combinations(train_ds.catalog, f_tr,
                                     n_base=config.plan_base, n_total=config.plan_total,
                                     rng=RngStream(seed).split(("plan", f_tr)))
        combos = {
            f_te: sample_eval_combinations(
                train_ds.catalog, f_te, plan, config.protocol.combos_per_fte,
                RngStream(seed).split(("evalcombos", f_tr, f_te)))
            for f_te in config.protocol.f_te
        }

    t0 = time.perf_counter()
    ckpt, history = train(train_ds, val_ds, plan, model_cfg, train_cfg, stats)
    train_time = time.perf_counter() - t0

    detail = []
    records = []
    metric = metric_name(task.kind)

    def aggregate(mode: str, rows: list) -> None:
        for row in rows:
            row.update({"variant": variant, "f_tr": f_tr, "mode": mode, "seed": seed})
        detail.extend(rows)
        by_fte: dict = {}
        for row in rows:
            by_fte.setdefault(row["f_te"], []).append(row)
        for f_te, group in sorted(by_fte.items()):
            records.append({
                "dataset": config.dataset_name, "variant": variant, "f_tr": f_tr,
                "f_te": f_te, "mode": mode, "seed": seed, "metric": metric,
                "value": sum(r["value"] for r in group) / len(group),
                "runtime_s": sum(r["runtime_s"] for r in group),
            })

    eval_rng = RngStream(seed).split(("eval", variant, f_tr))
    if variant == "gru-a":
        aggregate("zero-shot", zero_shot_eval(ckpt, test_ds, stats, plan,
                                              config.protocol, eval_rng))
    else:
        if "zero-shot" in config.protocol.modes:
            aggregate("zero-shot", zero_shot_eval(
                ckpt, test_ds, stats, plan, config.protocol, eval_rng, combos))
        if "fine-tune" in config.protocol.modes:
            aggregate("fine-tune", fine_tune_eval(
                ckpt, finetune_ds, test_ds, stats, plan, config.protocol,
                train_cfg, eval_rng, combos))
        if "overlap-fine-tune" in config.protocol.modes:
            assignment, _ = training_assignments(
                len(train_ds.instances), len(val_ds.instances), plan, seed)
            aggregate("overlap-fine-tune", overlap_fine_tune_eval(
                ckpt, train_ds, assignment, test_ds, stats, plan,
                config.protocol, train_cfg, eval_rng, combos))
        if "scratch" in config.protocol.modes and variant == "gru":
            aggregate("scratch", scratch_eval(
                model_cfg.to_dict(), finetune_ds, test_ds, stats, plan,
                config.protocol, train_cfg, eval_rng, combos))

    return {
        "records": records,
        "detail": detail,
        "train_runtime_s": train_time,
        "epochs_run": len(history),
        "best_val_loss": ckpt.best_val_loss,
    }


def _run_cell_job(args):
    variant, f_tr, seed, splits, config = args
    try:
        return (variant, f_tr, seed), run_cell(variant, f_tr, seed, splits, config)
    except Exception as exc:  # isolate worker failures; the parent records them
        return (variant, f_tr, seed), {"error": str(exc), "records": [], "detail": []}


def report_digest(records: list) -> int:
    """Digest over the canonical record fields; runtimes are excluded so
    that re-runs and resumed runs agree."""
    canon = [
        {k: rec[k] for k in ("dataset", "variant", "f_tr", "f_te", "mode",
                             "seed", "metric", "value")}
        for rec in records
    ]
    canon.sort(key=lambda r: json.dumps(r, sort_keys=True))
    return fnv1a64(json.dumps(canon, sort_keys=True).encode("utf-8"))


def record_sort_key(rec: dict):
    return (rec["dataset"], rec["variant"], rec["f_tr"], rec["mode"],
            rec["f_te"], rec["seed"])


def run_benchmark(splits: dict, config: BenchConfig) -> BenchReport:
    """Run the full grid over prepared splits.

    Cell failures are recorded and the run continues. With an output
    directory, completed cells persist as marker files and later runs reuse
    them; the report digest is invariant under such resumption.
    """
    from ..data import bundle_digest

    for name in ("train", "val", "finetune", "test"):
        if name not in splits or not isinstance(splits[name], Dataset):
            raise ConfigError(f"splits must include a {name!r} Dataset")

    outdir = Path(config.outdir) if config.outdir else None
    cell_dir = None
    if outdir:
        cell_dir = outdir / "cells"
        cell_dir.mkdir(parents=True, exist_ok=True)

    cells = enumerate_cells(config)
    done: dict = {}
    pending = []
    for variant, f_tr, seed in cells:
        marker = cell_dir / f"{cell_key(variant, f_tr, seed)}.json" if cell_dir else None
        if marker and marker.exists():
            try:
                done[(variant, f_tr, seed)] = json.loads(marker.read_text())
                continue
            except json.JSONDecodeError:
                log.warning("ignoring unreadable marker %s", marker)
        pending.append((variant, f_tr, seed))

    failures = []

    def finish(key, result):
        done[key] = result
        if cell_dir:
            name = f"{cell_key(*key)}.json"
            (cell_dir / name).write_text(json.dumps(result, sort_keys=True))

    if config.jobs > 1 and pending:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            jobs = [(v, f, s, splits, config) for v, f, s in pending]
            for key, result in pool.map(_run_cell_job, jobs):
                if "error" in result:
                    failures.append({"cell": cell_key(*key), "error": result["error"]})
                else:
                    finish(key, result)
    else:
        for variant, f_tr, seed in pending:
            try:
                finish((variant, f_tr, seed),
                       run_cell(variant, f_tr, seed, splits, config))
            except Exception as exc:  # cell isolation: record and continue
                log.exception("cell %s failed", cell_key(variant, f_tr, seed))
                failures.append({"cell": cell_key(variant, f_tr, seed), "error": str(exc)})

    records = []
    for result in done.values():
        records.extend(result["records"])
    records.sort(key=record_sort_key)

    report = BenchReport(
        records=records,
        config=config.to_dict(),
        digest=report_digest(records),
        data_digest=bundle_digest(splits),
        failures=failures,
    )
    if outdir:
        from .report import write_report
        write_report(report, outdir, write_csv=config.write_csv)
    return report
