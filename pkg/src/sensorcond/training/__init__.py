"""Losses, the dual-optimizer rule, training loops, and checkpoints."""

from .checkpoint import (Checkpoint, checkpoint_digest, load_checkpoint,
                         save_checkpoint)
from .loop import (TrainConfig, batch_loss, dataset_loss, fine_tune,
                   model_from_checkpoint, train, training_assignments)
from .losses import cross_entropy, squared_error
from .optim import (ADAM_BETA1, ADAM_BETA2, ADAM_EPS, EMBED_LR, NET_LR,
                    AdamState, DualOptimizer, adam_step, sgd_step)

__all__ = [
    "ADAM_BETA1", "ADAM_BETA2", "ADAM_EPS", "AdamState", "Checkpoint",
    "DualOptimizer", "EMBED_LR", "NET_LR", "TrainConfig", "adam_step",
    "batch_loss", "checkpoint_digest", "cross_entropy", "dataset_loss",
    "fine_tune", "load_checkpoint", "model_from_checkpoint", "save_checkpoint",
    "sgd_step", "squared_error", "train", "training_assignments",
]
