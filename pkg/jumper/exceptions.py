from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path


class JumperError(Exception):
    """Base class for errors raised by Jumper"""

    exit_code = 2

    def __init__(self, msg="Jumper failed."):
        super().__init__(msg)


class UsageError(JumperError):
    """The command line or the configuration is invalid"""

    exit_code = 1

    def __init__(self, msg="Invalid usage."):
        super().__init__(msg)


class EmptyInput(JumperError):
    """Empty text, dataset or record set"""

    def __init__(self, msg="Input cannot be empty."):
        super().__init__(msg)


class DimensionError(JumperError):
    """Operands of a kernel do not conform"""

    def __init__(self, shape_a: Sequence[int], shape_b: Sequence[int], op: str = "operation"):
        super().__init__(
            f"Dimension mismatch in {op}: {tuple(shape_a)} is incompatible with {tuple(shape_b)}"
        )
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)


class DataFormatError(JumperError):
    """A data file line cannot be parsed"""

    def __init__(self, msg: str, path: str | Path | None = None, line: int | None = None):
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{msg}")
        self.path = path
        self.line = line


class NonFiniteGradient(JumperError):
    """A gradient contains NaN or Inf"""

    def __init__(self, param_name: str):
        super().__init__(f"Non-finite gradient for parameter '{param_name}'.")
        self.param_name = param_name


class InvalidAction(JumperError):
    """An action index lies outside a slot's action space"""

    def __init__(self, action: int, num_actions: int):
        super().__init__(f"Action {action} is outside the action space [0, {num_actions - 1}].")


class SchemaMismatch(JumperError):
    """Slot states or data do not agree with the slot schema"""

    def __init__(self, msg="Data does not match the slot schema."):
        super().__init__(msg)


class UndefinedMetric(JumperError):
    """A metric has no records to be computed on"""

    def __init__(self, msg="Metric is undefined for the given records."):
        super().__init__(msg)


class FirstStepJump(JumperError):
    """Rationale gradient requested for a jump at the first sentence"""

    def __init__(
        self,
        msg="No previous sentence exists for a jump at step 1; "
        "use select_rationale_dims, which falls back to a zero previous encoding.",
    ):
        super().__init__(msg)


class ConfigError(UsageError):
    """Unknown key or invalid value in a run configuration"""

    def __init__(self, msg="Invalid configuration."):
        super().__init__(msg)


class UnknownSlot(UsageError):
    """Slot name not present in the schema"""

    def __init__(self, slot: str, valid_slots: Sequence[str]):
        super().__init__(f"Unknown slot '{slot}'. Valid slots: {', '.join(valid_slots)}")
        self.slot = slot
