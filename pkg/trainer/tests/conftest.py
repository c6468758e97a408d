import time

import pytest

from shapeseg_trainer.train import TrainConfig, train
from toolkit_cli import build_toolkit_dataset


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory):
    """3 pairs at 96x64, split 2 train / 1 val."""
    return build_toolkit_dataset(
        tmp_path_factory.mktemp("mini"), count=3, width=96, height=64, fraction=0.7
    )


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """20 pairs at 160x128, split 19 train / 1 val."""
    return build_toolkit_dataset(
        tmp_path_factory.mktemp("toy"), count=20, width=160, height=128, fraction=0.95
    )


@pytest.fixture(scope="session")
def init_checkpoint(mini_dataset, tmp_path_factory):
    """Zero-iteration checkpoint: the seeded initialization, saved."""
    out = tmp_path_factory.mktemp("init") / "init.pt"
    train(mini_dataset, TrainConfig(iterations=0, seed=5), out)
    return out


@pytest.fixture(scope="session")
def overfit(toy_dataset, tmp_path_factory):
    """One timed overfit run on the toy set, shared by the slow tests."""
    out = tmp_path_factory.mktemp("fit") / "toy.pt"
    config = TrainConfig(
        iterations=200, lr=1e-3, eps=1e-4, batch_size=4, seed=0, eval_every=5, stop_iou=0.9
    )
    start = time.monotonic()
    result = train(toy_dataset, config, out)
    elapsed = time.monotonic() - start
    return result, elapsed
