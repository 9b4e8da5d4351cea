from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, TypeVar

from jumper.exceptions import ConfigError, DataFormatError
from jumper.model import EncoderConfig, ModelConfig
from jumper.rationale import RationaleConfig
from jumper.rewards import RewardConfig
from jumper.text_data import DataConfig
from jumper.training import TrainConfig

logger = logging.getLogger(__name__)

C = TypeVar("C")

NESTED_CONFIGS: dict[str, type] = {
    "model": ModelConfig,
    "encoder": EncoderConfig,
    "reward": RewardConfig,
    "train": TrainConfig,
    "rationale": RationaleConfig,
    "data": DataConfig,
}


@dataclass
class RunConfig:
    """Every hyperparameter of a run"""

    model: ModelConfig = field(default_factory=ModelConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    rationale: RationaleConfig = field(default_factory=RationaleConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        return _build(cls, data, prefix="")


def _build(config_cls: type[C], data: Any, prefix: str) -> C:
    if not isinstance(data, dict):
        raise ConfigError(f"'{prefix.rstrip('.') or 'config'}' must be an object")

    known = {f.name: f for f in fields(config_cls)}  # type: ignore[arg-type]
    kwargs = {}
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if key not in known:
            raise ConfigError(f"Unknown config key '{dotted}'")
        nested_cls = NESTED_CONFIGS.get(key)
        if nested_cls is not None and is_dataclass(nested_cls):
            value = _build(nested_cls, value, prefix=f"{dotted}.")
        kwargs[key] = value

    try:
        return config_cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value in '{prefix.rstrip('.') or 'config'}': {e}")


def load_config(filepath: str | Path | None) -> RunConfig:
    """Defaults overlaid with the JSON file at `filepath` (if any)"""
    if filepath is None:
        return RunConfig()
    with open(filepath, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"Invalid JSON: {e.msg}", filepath, e.lineno)
    config = RunConfig.from_dict(data)
    logger.debug(f"Loaded config from {filepath}")
    return config


def default_config_json() -> str:
    return json.dumps(RunConfig().to_dict(), indent=2)
