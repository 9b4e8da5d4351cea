import json

import pytest

from jumper.config import RunConfig, default_config_json, load_config
from jumper.exceptions import ConfigError, DataFormatError


def test_default_hyperparameters():
    config = load_config(None)
    assert config.model.encoder.window_sizes == [1, 2, 3, 4, 5]
    assert config.model.encoder.maps_per_window == 200
    assert config.model.encoder.dropout_p == 0.5
    assert config.model.hidden_size == 20
    assert config.reward.intermediate_r == 0.05
    assert config.reward.gamma == 0.9
    assert config.reward.epsilon == 0.1
    assert config.reward.baseline_samples == 5
    assert config.train.batch_size == 50
    assert config.rationale.top_d == 10


def test_load_config_overrides_nested_values(data_dir):
    config = load_config(data_dir / "config.json")
    assert config.model.encoder.window_sizes == [1, 2]
    assert config.model.encoder.dropout_p == 0.5
    assert config.model.hidden_size == 3
    assert config.model.precision == "float64"
    assert config.reward.baseline_samples == 2
    assert config.reward.gamma == 0.9
    assert config.train.max_epochs == 1


def test_default_config_json_round_trip():
    data = json.loads(default_config_json())
    assert RunConfig.from_dict(data) == RunConfig()
    assert data["model"]["encoder"]["embed_dim"] == 300


@pytest.mark.parametrize(
    "data,message",
    [
        ({"model": {"encoder": {"windows": [1]}}}, "model.encoder.windows"),
        ({"optimizer": {}}, "'optimizer'"),
        ({"reward": {"gamma": 2.0}}, "'reward'"),
        ({"model": {"encoder": {"window_sizes": [0]}}}, "'model.encoder'"),
        ({"train": []}, "'train' must be an object"),
    ],
)
def test_invalid_config(data, message):
    with pytest.raises(ConfigError, match=message):
        RunConfig.from_dict(data)


def test_broken_json_names_line(tempdir):
    path = tempdir / "broken.json"
    path.write_text('{\n  "seed": 1,\n  "train": \n}\n')
    with pytest.raises(DataFormatError, match=r"broken.json:4:"):
        load_config(path)


def test_missing_config_file(tempdir):
    with pytest.raises(OSError):
        load_config(tempdir / "missing.json")
