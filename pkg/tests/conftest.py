import numpy as np
import pytest

from sensorcond.autodiff import RngStream
from sensorcond.data import SynthConfig, compute_stats, split, synth_generate


@pytest.fixture(scope="session")
def small_classification():
    """A small but learnable classification dataset shared across tests."""
    ds = synth_generate(SynthConfig(sensors=8, num_classes=3, instances=120,
                                    length=10, seed=7))
    return ds


@pytest.fixture(scope="session")
def small_splits(small_classification):
    train, val, finetune, test = split(small_classification,
                                       rng=RngStream(7).split("split"))
    return {"train": train, "val": val, "finetune": finetune, "test": test}


@pytest.fixture(scope="session")
def small_stats(small_splits):
    return compute_stats(small_splits["train"])


@pytest.fixture()
def rng():
    return RngStream(123)


@pytest.fixture()
def np_rng():
    return np.random.default_rng(123)
