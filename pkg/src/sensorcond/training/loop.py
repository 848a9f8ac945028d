"""Training and fine-tuning loops with validation-based early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict

import numpy as np

from ..autodiff import RngStream, Tape, Tensor, ops
from ..data import (Dataset, Stats, assign_combinations, make_batches,
                    one_hot)
from ..errors import ContractError
from ..models import Model, ModelConfig, build_model, set_parameters
from .checkpoint import Checkpoint
from .losses import cross_entropy, squared_error
from .optim import DualOptimizer

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    seed: int = 0
    max_epochs: int = 150
    batch_size: int = 64
    patience: int = 20
    finetune_epochs: int = 50
    finetune_batch: int = 32
    finetune_patience: int = 10
    embed_lr: float = 5e-4
    net_lr: float = 1e-4

    def to_dict(self) -> dict:
        return asdict(self)


def batch_loss(model: Model, batch, training: bool, rng) -> Tensor:
    out = model.forward_batch(batch.inputs, batch.active, training, rng)
    if model.config.task == "classification":
        targets = Tensor(one_hot(batch.targets, model.config.num_classes))
        return cross_entropy(out, targets)
    preds = ops.reshape(out, (out.data.shape[0],))
    return squared_error(preds, Tensor(batch.targets))


def dataset_loss(model: Model, ds: Dataset, assignment, plan, stats: Stats,
                 batch_size: int, rng, force_full: bool = False) -> float:
    """Instance-weighted mean loss over a whole split, without dropout."""
    total, count = 0.0, 0
    for batch in make_batches(ds, assignment, plan, stats, batch_size, rng,
                              force_full=force_full):
        loss = batch_loss(model, batch, training=False, rng=None)
        total += loss.item() * batch.size
        count += batch.size
    return total / max(1, count)


def _snapshot(model: Model) -> dict:
    return {k: t.data.copy() for k, t in model.parameters().items()}


def _fit(model: Model, train_ds: Dataset, val_ds: Dataset,
         train_assign, val_assign, plan, stats: Stats,
         max_epochs: int, batch_size: int, patience: int,
         cfg: TrainConfig, rng: RngStream, force_full: bool):
    """Shared epoch loop; returns (best params, best val, best epoch, history, aborted)."""
    params = model.parameters()
    opt = DualOptimizer(embed_lr=cfg.embed_lr, net_lr=cfg.net_lr)
    best = _snapshot(model)
    best_val = np.inf
    best_epoch = -1
    history = []
    aborted = False
    eval_rng = rng.split("eval")

    for epoch in range(max_epochs):
        epoch_rng = rng.split(("epoch", epoch))
        drop_rng = epoch_rng.split("dropout")
        epoch_total, epoch_count = 0.0, 0
        diverged = False
        for batch in make_batches(train_ds, train_assign, plan, stats, batch_size,
                                  epoch_rng.split("batches"), force_full=force_full):
            with Tape() as tape:
                loss = batch_loss(model, batch, training=True, rng=drop_rng)
                value = loss.item()
                if not np.isfinite(value):
                    diverged = True
                    break
                tape.backward(loss, params.values())
            opt.step(params)
            opt.zero_grads(params)
            epoch_total += value * batch.size
            epoch_count += batch.size
        params_ok = all(np.all(np.isfinite(t.data)) for t in params.values())
        if diverged or not params_ok:
            # a saturated forward can keep the loss finite while gradients
            # blow up, so parameters are checked as well
            log.warning("divergence at epoch %d; keeping last good checkpoint", epoch)
            aborted = True
            break

        train_loss = epoch_total / max(1, epoch_count)
        val_loss = dataset_loss(model, val_ds, val_assign, plan, stats,
                                batch_size, eval_rng.clone(), force_full=force_full)
        if not np.isfinite(val_loss):
            log.warning("validation loss diverged at epoch %d", epoch)
            aborted = True
            break
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best = _snapshot(model)
        elif epoch - best_epoch >= patience:
            break

    if best_epoch < 0:
        best_val = float("nan") if not history else history[0]["val_loss"]
        best_epoch = 0
    return best, best_val, best_epoch, history, aborted


def training_assignments(n_train: int, n_val: int, plan, seed: int):
    """The deterministic instance-to-combination assignments used by train();
    exposed so evaluation protocols can reconstruct them."""
    rng = RngStream(seed)
    return (assign_combinations(n_train, plan, rng.split("assign.train")),
            assign_combinations(n_val, plan, rng.split("assign.val")))


def train(train_ds: Dataset, val_ds: Dataset, plan, model_cfg: ModelConfig,
          cfg: TrainConfig, stats: Stats):
    """Train one variant from scratch.

    Returns (Checkpoint, history). The all-sensors variant ignores the plan
    and sees every sensor in every batch; for the others, every instance is
    deterministically assigned one plan combination per split.
    """
    rng = RngStream(cfg.seed)
    model = build_model(model_cfg, train_ds.catalog, rng.split("init"))
    force_full = model_cfg.variant == "gru-a"
    if force_full or plan is None:
        train_assign = val_assign = None
    else:
        train_assign, val_assign = training_assignments(
            len(train_ds.instances), len(val_ds.instances), plan, cfg.seed)

    best, best_val, best_epoch, history, aborted = _fit(
        model, train_ds, val_ds, train_assign, val_assign, plan, stats,
        cfg.max_epochs, cfg.batch_size, cfg.patience, cfg, rng.split("fit"), force_full)

    ckpt = Checkpoint(
        variant=model_cfg.variant,
        catalog_names=train_ds.catalog.names,
        model_config=model_cfg.to_dict(),
        train_config=cfg.to_dict(),
        params=best,
        best_val_loss=float(best_val),
        best_epoch=int(best_epoch),
        meta={"epochs_run": len(history), "aborted": aborted},
    )
    return ckpt, history


def model_from_checkpoint(ckpt: Checkpoint) -> Model:
    from ..sensors import SensorCatalog
    model = build_model(ModelConfig.from_dict(ckpt.model_config),
                        SensorCatalog(ckpt.catalog_names), RngStream(0))
    set_parameters(model, ckpt.params)
    return model


def fine_tune(ckpt: Checkpoint, finetune_ds: Dataset, cfg: TrainConfig,
              stats: Stats, seed_tag=0):
    """Adapt a trained checkpoint to one sensor combination.

    All fine-tuning instances must share one availability mask (use
    data.remask first). A held-out tenth drives early stopping; optimizer
    moments start fresh. Returns (Checkpoint, history).
    """
    if len(finetune_ds.instances) == 0:
        raise ContractError("fine-tuning split is empty")
    masks = {inst.active.key() for inst in finetune_ds.instances}
    if len(masks) != 1:
        raise ContractError("fine-tuning instances must share a single active set")
    if cfg.finetune_epochs <= 0:
        return ckpt.clone(), []

    rng = RngStream(cfg.seed).split(("finetune", seed_tag))
    model = model_from_checkpoint(ckpt)

    n = len(finetune_ds.instances)
    if n >= 2:
        order = rng.split("holdout").permutation(n)
        n_val = max(1, n // 10)
        val_ids = set(order[:n_val].tolist())
        adapt = finetune_ds.replace_instances(
            [inst for i, inst in enumerate(finetune_ds.instances) if i not in val_ids])
        heldout = finetune_ds.replace_instances(
            [inst for i, inst in enumerate(finetune_ds.instances) if i in val_ids])
    else:
        adapt = heldout = finetune_ds

    best, best_val, best_epoch, history, aborted = _fit(
        model, adapt, heldout, None, None, None, stats,
        cfg.finetune_epochs, cfg.finetune_batch, cfg.finetune_patience,
        cfg, rng.split("fit"), force_full=False)

    tuned = ckpt.clone()
    tuned.params = best
    tuned.best_val_loss = float(best_val)
    tuned.best_epoch = int(best_epoch)
    tuned.meta = dict(ckpt.meta)
    tuned.meta.update({"finetuned": True, "finetune_epochs_run": len(history),
                       "aborted": aborted})
    return tuned, history
