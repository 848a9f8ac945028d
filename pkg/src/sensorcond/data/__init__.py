"""Dataset model, ingestion, normalization, masking plans, and batching."""

from .combos import (CombinationPlan, assign_combinations, generate_combinations,
                     mask_count, sample_test_combination)
from .core import (Dataset, TaskSpec, TimeSeriesInstance, bundle_digest,
                   dataset_digest, fnv1a64)
from .manifest import load_dataset, save_dataset
from .pipeline import (DEFAULT_FRACTIONS, MiniBatch, make_batches, one_hot,
                       remask, split, window, window_dataset)
from .stats import (Stats, compute_stats, denormalize_target, mean_impute,
                    normalize, normalize_target, prepare_instance)
from .synth import NOISE_SD, SynthConfig, noise_sensor_index, synth_generate

__all__ = [
    "CombinationPlan", "Dataset", "DEFAULT_FRACTIONS", "MiniBatch", "NOISE_SD",
    "Stats", "SynthConfig", "TaskSpec", "TimeSeriesInstance",
    "assign_combinations", "bundle_digest", "compute_stats", "dataset_digest",
    "denormalize_target", "fnv1a64", "generate_combinations", "load_dataset",
    "make_batches", "mask_count", "mean_impute", "noise_sensor_index",
    "normalize", "normalize_target", "one_hot", "prepare_instance", "remask",
    "sample_test_combination", "save_dataset", "split", "synth_generate",
    "window", "window_dataset",
]
