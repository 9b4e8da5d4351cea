from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from jumper.nn import ParamStore

LossFn = Callable[[bool], float]
"""Called with `backward=True` it must also accumulate analytic gradients into the store"""


def grad_check(
    loss_fn: LossFn,
    params: ParamStore,
    eps: float = 1e-5,
    max_coords: int = 16,
    names: Sequence[str] | None = None,
    seed: int = 0,
) -> float:
    """Largest relative error between analytic and central-difference gradients

    Up to `max_coords` coordinates are sampled from every parameter (all of them for
    small parameters). The error of one coordinate is
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    params.zero_grad()
    loss_fn(True)
    analytic = {name: tensor.grad.copy() for name, tensor in params.items()}

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in names if names is not None else params.names():
        tensor = params[name]
        flat = tensor.values.reshape(-1)
        if not np.shares_memory(flat, tensor.values):
            raise ValueError(f"Parameter '{name}' is not contiguous")
        size = flat.size
        coords = rng.choice(size, size=min(size, max_coords), replace=False)
        for i in coords:
            original = flat[i]
            flat[i] = original + eps
            loss_plus = loss_fn(False)
            flat[i] = original - eps
            loss_minus = loss_fn(False)
            flat[i] = original

            numeric = (loss_plus - loss_minus) / (2 * eps)
            exact = analytic[name].reshape(-1)[i]
            error = abs(exact - numeric) / max(1e-8, abs(exact) + abs(numeric))
            worst = max(worst, error)

    params.zero_grad()
    return float(worst)
