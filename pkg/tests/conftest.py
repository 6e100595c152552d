"""Shared fixtures.

The desk-scale model pair (a 3x3 CNN target and a 5x5 CNN surrogate trained on
the ``shapes`` dataset) takes about two minutes to train on one core, so it is
trained once and kept in the pytest cache directory. Delete it with
``pytest --cache-clear`` to force retraining.
"""
import numpy as np
import pytest

from sqba import data, nn
from sqba.io import load_dataset, load_model, save_dataset, save_model
from sqba.train import TrainConfig, train

PAIR_RECIPES = {
    # name: (architecture, init seed, epochs)
    "cnn": ("cnn", 0, 15),
    "cnn5": ("cnn5", 1, 12),
}

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def blob_data():
    return data.blobs(400, dim=6, seed=0)


@pytest.fixture(scope="session")
def shapes_split():
    ds = data.shapes(4000, seed=0)
    return ds.split(0.25, 0)


@pytest.fixture(scope="session")
def model_dir(request, shapes_split):
    """Directory holding train.bin, test.bin, cnn.bin and cnn5.bin."""
    root = request.config.cache.mkdir("sqba_shapes_pair")
    tr, te = shapes_split
    if not (root / "train.bin").exists():
        save_dataset(tr, root / "train.bin")
        save_dataset(te, root / "test.bin")
    for name, (arch, seed, epochs) in PAIR_RECIPES.items():
        path = root / f"{name}.bin"
        if path.exists():
            continue
        net = nn.ARCHITECTURES[arch](tr.shape, tr.num_classes, seed=seed)
        net.name = name
        train(net, tr.images, tr.labels, TrainConfig(epochs=epochs, lr=2e-3, seed=seed),
              eval_set=(te.images, te.labels))
        save_model(net, path)
    return root


@pytest.fixture(scope="session")
def target_cnn(model_dir):
    return load_model(model_dir / "cnn.bin")


@pytest.fixture(scope="session")
def surrogate_cnn5(model_dir):
    return load_model(model_dir / "cnn5.bin")


@pytest.fixture(scope="session")
def test_set(model_dir):
    return load_dataset(model_dir / "test.bin")
