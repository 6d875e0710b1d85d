import numpy as np
import pytest
import torch

from driveintent.config import net_config_from, profile_defaults
from driveintent.dataio import holdout_split
from driveintent.pipeline import ClipStore
from driveintent.synth import generate_synthetic

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small balanced synthetic dataset shared across test modules."""
    root = tmp_path_factory.mktemp("tinydata")
    manifest = generate_synthetic(30, seed=11, out_dir=root)
    return manifest


@pytest.fixture(scope="session")
def desk_cfg():
    return profile_defaults("desk")


@pytest.fixture(scope="session")
def tiny_stores(tiny_dataset, desk_cfg):
    net_cfg = net_config_from(desk_cfg)
    train_m, test_m = holdout_split(tiny_dataset, 0.8, seed=3)
    return ClipStore(train_m, net_cfg), ClipStore(test_m, net_cfg), net_cfg


@pytest.fixture(scope="session")
def tiny_model(tiny_stores):
    from driveintent.augment import preset_config
    from driveintent.train import TrainConfig, train

    train_store, _, _ = tiny_stores
    payload, _, _ = train(train_store, TrainConfig(epochs=4, seed=2), preset_config("B"))
    return payload


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def random_frames(rng, n=15, h=32, w=32):
    return rng.integers(0, 256, size=(n, h, w, 3)).astype(np.uint8)
