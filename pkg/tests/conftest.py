from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from jumper.model import EncoderConfig, JumperModel, ModelConfig
from jumper.text_data import Slot, SlotSchema


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", help="Run end-to-end training tests")


def pytest_collection_modifyitems(config, items):
    skip_slow_tests = pytest.mark.skipif("not config.getoption('--slow')")

    for item in items:
        if item.name.startswith("test_slow_"):
            item.add_marker(skip_slow_tests)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(__file__).parent / "test_data"


@pytest.fixture(scope="module")
def tempdir():
    with TemporaryDirectory() as tempdir:
        yield Path(tempdir)


@pytest.fixture(scope="session")
def two_slot_schema() -> SlotSchema:
    return SlotSchema([Slot("sentiment", ("neg", "pos")), Slot("topic", ("a", "b", "c"))])


@pytest.fixture
def tiny_model(two_slot_schema):
    """Float64 model small enough for finite differences (d=8, K=12, H=4, 2 slots)"""

    def build(sharing: bool = False, seed: int = 0, vocab_size: int = 20) -> JumperModel:
        config = ModelConfig(
            encoder=EncoderConfig(
                window_sizes=[1, 2, 3], maps_per_window=4, dropout_p=0.0, embed_dim=8
            ),
            hidden_size=4,
            sharing=sharing,
            precision="float64",
        )
        model = JumperModel(config, two_slot_schema, vocab_size, seed=seed)
        rng = np.random.default_rng(seed + 1)
        for _, tensor in model.params.items():
            tensor.values[...] = rng.uniform(-0.5, 0.5, size=tensor.shape)
        model.params["embedding"].values[0] = 0.0
        return model

    return build
