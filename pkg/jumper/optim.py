from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from jumper.exceptions import NonFiniteGradient
from jumper.nn import ParamStore
from jumper.types import FloatArray

logger = logging.getLogger(__name__)


@dataclass
class AdaDeltaState:
    """Running averages E[g^2] and E[dx^2] per parameter

    `lr_scale` multiplies the applied step only. E[dx^2] accumulates the unscaled
    AdaDelta update, so the scale does not feed back into later step sizes.
    """

    rho: float = 0.95
    eps: float = 1e-6
    lr_scale: float = 0.1
    square_avg: dict[str, FloatArray] = field(default_factory=dict)
    delta_avg: dict[str, FloatArray] = field(default_factory=dict)
    num_steps: int = 0

    def accumulators(self, name: str, like: FloatArray) -> tuple[FloatArray, FloatArray]:
        if name not in self.square_avg:
            self.square_avg[name] = np.zeros_like(like)
            self.delta_avg[name] = np.zeros_like(like)
        return self.square_avg[name], self.delta_avg[name]


def adadelta_update(
    state: AdaDeltaState,
    params: ParamStore,
    grads: Mapping[str, FloatArray] | None = None,
):
    """Apply one AdaDelta step in place. `grads` defaults to the parameters' own buffers."""
    if grads is None:
        grads = params.grads()

    # Nothing is touched unless every gradient is usable
    for name in params:
        if name not in grads:
            raise KeyError(f"Missing gradient for parameter '{name}'")
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteGradient(name)

    rho, eps = state.rho, state.eps
    for name, tensor in params.items():
        grad = grads[name]
        square_avg, delta_avg = state.accumulators(name, tensor.values)

        square_avg *= rho
        square_avg += (1.0 - rho) * grad * grad
        delta = -np.sqrt(delta_avg + eps) / np.sqrt(square_avg + eps) * grad
        delta_avg *= rho
        delta_avg += (1.0 - rho) * delta * delta

        tensor.values += state.lr_scale * delta

    state.num_steps += 1
