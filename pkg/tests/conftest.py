"""Shared fixtures: small trained checkpoints reused across test modules."""

import json

import pytest

from flowlag.training import TrainConfig, train


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    """A quick D=4 training run with artifacts on disk."""
    out = tmp_path_factory.mktemp("tiny_run")
    config = TrainConfig(dataset={"kind": "gaussian", "dim": 4}, steps=300,
                         batch_size=64, hidden=(16, 16), log_every=50, seed=11)
    result = train(config, out_dir=out)
    return result


@pytest.fixture(scope="session")
def tiny_config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "train.json"
    path.write_text(json.dumps({
        "dataset": {"kind": "gaussian", "dim": 4},
        "steps": 200, "batch_size": 64, "hidden": [16, 16],
        "log_every": 50, "seed": 7,
    }))
    return path
