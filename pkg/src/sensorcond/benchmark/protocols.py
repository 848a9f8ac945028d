"""Zero-shot, fine-tuning, overlap-fine-tuning, and scratch protocols.

All protocols evaluate on sensor combinations unseen in the training plan
and never mutate the checkpoint they are given: anything that needs to
update weights first clones the parameters into a fresh model.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from ..data import (Dataset, Stats, denormalize_target, prepare_instance,
                    remask, sample_test_combination)
from ..errors import ContractError
from ..models import Model
from ..sensors import ActiveSet
from ..training import Checkpoint, TrainConfig, fine_tune, model_from_checkpoint, train
from .metrics import error_rate, rmse

log = logging.getLogger(__name__)

MODES = ("zero-shot", "fine-tune", "overlap-fine-tune", "scratch")


@dataclass
class EvalProtocol:
    f_te: tuple = (0.1, 0.25, 0.4, 0.5)
    combos_per_fte: int = 5
    modes: tuple = ("zero-shot", "fine-tune")
    keep_predictions: bool = False

    def __post_init__(self):
        for mode in self.modes:
            if mode not in MODES:
                raise ContractError(f"unknown evaluation mode {mode!r}")


def sample_eval_combinations(catalog, f_te: float, plan, count: int, rng) -> list:
    """`count` pairwise-distinct combinations, each unseen in the plan."""
    out: list = []
    taken: set = set()
    for _ in range(count):
        comb = sample_test_combination(catalog, f_te, plan, rng, exclude=taken)
        taken.add(comb.key())
        out.append(comb)
    return out


def predict_dataset(model: Model, ds: Dataset, active: ActiveSet, stats: Stats,
                    chunk: int = 256):
    """Re-mask, impute, and predict a whole split.

    Returns (predictions, references): class labels both sides for
    classification; denormalized outputs and raw targets for regression.
    """
    by_len: dict = {}
    for inst in ds.instances:
        by_len.setdefault(inst.length, []).append(inst)
    preds_parts, refs_parts, ids = [], [], []
    for _t, insts in sorted(by_len.items()):
        for start in range(0, len(insts), chunk):
            block = insts[start:start + chunk]
            inputs = np.stack([prepare_instance(inst, active, stats, ds.normalization)
                               for inst in block])
            out = model.predict(inputs, active)
            if ds.task.kind == "classification":
                preds_parts.append(out)
                refs_parts.append(np.asarray([int(i.target) for i in block]))
            else:
                preds_parts.append(np.asarray([denormalize_target(v, stats) for v in out]))
                refs_parts.append(np.asarray([float(i.target) for i in block]))
            ids.extend(inst.id for inst in block)
    return np.concatenate(preds_parts), np.concatenate(refs_parts), ids


def score(task_kind: str, preds, refs) -> float:
    return error_rate(preds, refs) if task_kind == "classification" else rmse(preds, refs)


def metric_name(task_kind: str) -> str:
    return "error_rate" if task_kind == "classification" else "rmse"


def _record(f_te, comb, catalog, value, n, started, predictions=None) -> dict:
    rec = {
        "f_te": f_te,
        "combination": comb.names(catalog),
        "value": float(value),
        "n_instances": int(n),
        "runtime_s": time.perf_counter() - started,
    }
    if predictions is not None:
        rec["predictions"] = predictions
    return rec


def _prediction_payload(protocol, preds, refs, ids):
    if not protocol.keep_predictions:
        return None
    return {"ids": list(ids), "pred": np.asarray(preds).tolist(),
            "ref": np.asarray(refs).tolist()}


def zero_shot_eval(ckpt: Checkpoint, test_ds: Dataset, stats: Stats, plan,
                   protocol: EvalProtocol, rng,
                   combinations: dict | None = None) -> list:
    """Direct inference on unseen combinations, one record per combination.

    The all-sensors variant has no masking axis: it produces a single record
    at f_te = 0 with the full catalog active. `combinations` may pre-pin the
    sampled combinations per f_te so several variants see identical masks.
    """
    model = model_from_checkpoint(ckpt)
    records = []
    if ckpt.variant == "gru-a":
        started = time.perf_counter()
        full = ActiveSet.full(test_ds.catalog.size)
        preds, refs, ids = predict_dataset(model, test_ds, full, stats)
        return [_record(0.0, full, test_ds.catalog, score(test_ds.task.kind, preds, refs),
                        len(refs), started, _prediction_payload(protocol, preds, refs, ids))]
    for f_te in protocol.f_te:
        if combinations is not None:
            combos = combinations[f_te]
        else:
            combos = sample_eval_combinations(test_ds.catalog, f_te, plan,
                                              protocol.combos_per_fte, rng)
        for comb in combos:
            started = time.perf_counter()
            preds, refs, ids = predict_dataset(model, test_ds, comb, stats)
            records.append(_record(f_te, comb, test_ds.catalog,
                                   score(test_ds.task.kind, preds, refs), len(refs), started,
                                   _prediction_payload(protocol, preds, refs, ids)))
    return records


def fine_tune_eval(ckpt: Checkpoint, finetune_ds: Dataset, test_ds: Dataset,
                   stats: Stats, plan, protocol: EvalProtocol, cfg: TrainConfig,
                   rng, combinations: dict | None = None) -> list:
    """Per combination: clone the checkpoint, fine-tune on the re-masked
    fine-tuning split, then evaluate on the test split under that mask.

    An empty fine-tuning split falls back to zero-shot with a warning.
    """
    if len(finetune_ds.instances) == 0:
        log.warning("fine-tuning split is empty; falling back to zero-shot evaluation")
        return zero_shot_eval(ckpt, test_ds, stats, plan, protocol, rng, combinations)
    records = []
    for f_te in protocol.f_te:
        if combinations is not None:
            combos = combinations[f_te]
        else:
            combos = sample_eval_combinations(test_ds.catalog, f_te, plan,
                                              protocol.combos_per_fte, rng)
        for k, comb in enumerate(combos):
            started = time.perf_counter()
            masked_ft = remask(finetune_ds, comb)
            tuned, _hist = fine_tune(ckpt, masked_ft, cfg, stats, seed_tag=(f_te, k))
            model = model_from_checkpoint(tuned)
            preds, refs, ids = predict_dataset(model, test_ds, comb, stats)
            records.append(_record(f_te, comb, test_ds.catalog,
                                   score(test_ds.task.kind, preds, refs), len(refs), started,
                                   _prediction_payload(protocol, preds, refs, ids)))
    return records


def overlap_score(a: ActiveSet, b: ActiveSet) -> tuple:
    inter = int((a.mask & b.mask).sum())
    union = int((a.mask | b.mask).sum())
    return inter, inter / union if union else 0.0


def select_overlap_combination(plan, test_active: ActiveSet) -> int:
    """Index of the plan combination with the highest overlap |A . B| with
    the test combination; ties prefer larger Jaccard, then the lower index."""
    best_idx = 0
    best = (-1, -1.0)
    for i, comb in enumerate(plan.combinations):
        cand = overlap_score(comb, test_active)
        if cand > best:
            best = cand
            best_idx = i
    return best_idx


def overlap_fine_tune_eval(ckpt: Checkpoint, train_ds: Dataset, train_assignment,
                           test_ds: Dataset, stats: Stats, plan,
                           protocol: EvalProtocol, cfg: TrainConfig, rng,
                           combinations: dict | None = None) -> list:
    """Fine-tune on existing training instances whose assigned combination
    overlaps the test combination the most, re-masked to the test mask."""
    records = []
    assignment = np.asarray(train_assignment)
    for f_te in protocol.f_te:
        if combinations is not None:
            combos = combinations[f_te]
        else:
            combos = sample_eval_combinations(test_ds.catalog, f_te, plan,
                                              protocol.combos_per_fte, rng)
        for k, comb in enumerate(combos):
            started = time.perf_counter()
            chosen = select_overlap_combination(plan, comb)
            members = [train_ds.instances[i] for i in np.flatnonzero(assignment == chosen)]
            if not members:
                log.warning("no training instances assigned to combination %d; skipping", chosen)
                continue
            masked = remask(train_ds.replace_instances(members), comb)
            tuned, _hist = fine_tune(ckpt, masked, cfg, stats, seed_tag=("overlap", f_te, k))
            model = model_from_checkpoint(tuned)
            preds, refs, ids = predict_dataset(model, test_ds, comb, stats)
            rec = _record(f_te, comb, test_ds.catalog,
                          score(test_ds.task.kind, preds, refs), len(refs), started,
                          _prediction_payload(protocol, preds, refs, ids))
            rec["overlap_combination_index"] = chosen
            records.append(rec)
    return records


def scratch_eval(model_config: dict, finetune_ds: Dataset, test_ds: Dataset,
                 stats: Stats, plan, protocol: EvalProtocol, cfg: TrainConfig,
                 rng, combinations: dict | None = None) -> list:
    """Sanity baseline: train the plain variant from scratch on just the
    re-masked fine-tuning split, then evaluate."""
    from ..models import ModelConfig

    if len(finetune_ds.instances) == 0:
        raise ContractError("scratch mode needs a nonempty fine-tuning split")
    records = []
    base_cfg = dict(model_config)
    base_cfg["variant"] = "gru"
    for f_te in protocol.f_te:
        if combinations is not None:
            combos = combinations[f_te]
        else:
            combos = sample_eval_combinations(test_ds.catalog, f_te, plan,
                                              protocol.combos_per_fte, rng)
        for k, comb in enumerate(combos):
            started = time.perf_counter()
            masked = remask(finetune_ds, comb)
            n = len(masked.instances)
            order = rng.split(("scratch-holdout", f_te, k)).permutation(n)
            n_val = max(1, n // 10)
            val_ids = set(order[:n_val].tolist())
            adapt = masked.replace_instances(
                [inst for i, inst in enumerate(masked.instances) if i not in val_ids])
            heldout = masked.replace_instances(
                [inst for i, inst in enumerate(masked.instances) if i in val_ids])
            scratch_cfg = TrainConfig(
                seed=cfg.seed, max_epochs=cfg.max_epochs, batch_size=cfg.finetune_batch,
                patience=cfg.patience, embed_lr=cfg.embed_lr, net_lr=cfg.net_lr)
            ckpt, _hist = train(adapt, heldout, None, ModelConfig.from_dict(base_cfg),
                                scratch_cfg, stats)
            model = model_from_checkpoint(ckpt)
            preds, refs, ids = predict_dataset(model, test_ds, comb, stats)
            records.append(_record(f_te, comb, test_ds.catalog,
                                   score(test_ds.task.kind, preds, refs), len(refs), started,
                                   _prediction_payload(protocol, preds, refs, ids)))
    return records
