"""
Differentiable numeric kernels

Every kernel comes as a forward/backward pair. Forward functions take and return
`Tensor`s; the matching backward function reads the output's `grad` and accumulates
exact gradients into the `grad` buffers of all inputs. There is no graph engine:
callers replay the backward functions in reverse order themselves.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from jumper.exceptions import DimensionError, EmptyInput
from jumper.types import FloatArray, IntArray, Precision

INIT_SCALE = 0.01

GRU_PARAM_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")

logger = logging.getLogger(__name__)


class Tensor:
    """Dense array with a gradient buffer of identical shape"""

    __slots__ = ("values", "grad")

    def __init__(self, values, dtype=None):
        values = np.asarray(values, dtype=dtype)
        if not np.issubdtype(values.dtype, np.floating):
            values = values.astype(np.float64)
        self.values: FloatArray = values
        self.grad: FloatArray = np.zeros_like(values)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"


class ParamStore:
    """Named, trainable parameters

    Iteration is always in sorted-name order. Initial values are drawn from
    uniform[-0.01, 0.01] in the order parameters are added, so a fixed `seed`
    and a fixed construction order give bit-identical stores.
    """

    def __init__(self, seed: int = 0, precision: Precision = "float64"):
        self.seed = seed
        self.dtype = np.dtype(precision)
        self._rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}

    def add(
        self,
        name: str,
        shape: Sequence[int],
        init: str = "uniform",
        scale: float = INIT_SCALE,
    ) -> Tensor:
        if name in self._params:
            raise ValueError(f"Parameter '{name}' already exists")
        if any(dim <= 0 for dim in shape):
            raise DimensionError(shape, shape, f"parameter '{name}'")

        if init == "uniform":
            values = self._rng.uniform(-scale, scale, size=tuple(shape))
        elif init == "zeros":
            values = np.zeros(tuple(shape))
        else:
            raise ValueError(f"Unknown initializer: {init}")

        tensor = Tensor(values.astype(self.dtype))
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names())

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self) -> list[tuple[str, Tensor]]:
        return [(name, self._params[name]) for name in self.names()]

    def slice(self, prefix: str) -> dict[str, Tensor]:
        """Parameters under `prefix.`, keyed without the prefix"""
        prefix = prefix + "."
        return {
            name[len(prefix) :]: tensor
            for name, tensor in self.items()
            if name.startswith(prefix)
        }

    def zero_grad(self):
        for tensor in self._params.values():
            tensor.zero_grad()

    def grads(self) -> dict[str, FloatArray]:
        return {name: tensor.grad for name, tensor in self.items()}

    def snapshot(self) -> dict[str, FloatArray]:
        return {name: tensor.values.copy() for name, tensor in self.items()}

    def load_snapshot(self, snapshot: Mapping[str, FloatArray]):
        for name, tensor in self.items():
            values = np.asarray(snapshot[name])
            if values.shape != tensor.shape:
                raise DimensionError(tensor.shape, values.shape, f"loading '{name}'")
            tensor.values[...] = values

    def num_parameters(self) -> int:
        return sum(tensor.values.size for tensor in self._params.values())


def affine(W: Tensor, x: Tensor, b: Tensor) -> Tensor:
    if W.values.ndim != 2 or x.shape != (W.shape[1],):
        raise DimensionError(W.shape, x.shape, "affine")
    if b.shape != (W.shape[0],):
        raise DimensionError(W.shape, b.shape, "affine")
    return Tensor(W.values @ x.values + b.values)


def affine_backward(W: Tensor, x: Tensor, b: Tensor, y: Tensor):
    dy = y.grad
    W.grad += np.outer(dy, x.values)
    x.grad += W.values.T @ dy
    b.grad += dy


def softmax(v: Tensor) -> Tensor:
    if v.values.ndim != 1 or v.shape[0] < 1:
        raise DimensionError(v.shape, (1,), "softmax")
    shifted = np.exp(v.values - v.values.max())
    return Tensor(shifted / shifted.sum())


def softmax_backward(v: Tensor, p: Tensor):
    dp = p.grad
    v.grad += p.values * (dp - np.dot(dp, p.values))


def log_softmax_grad(p: FloatArray, action: int) -> FloatArray:
    """d log p[action] / d logits"""
    grad = -p.copy()
    grad[action] += 1.0
    return grad


def sigmoid(x: FloatArray) -> FloatArray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.values, 0.0))


def relu_backward(x: Tensor, y: Tensor):
    x.grad += y.grad * (x.values > 0)


def max_pool_argmax(features: Tensor) -> tuple[Tensor, IntArray]:
    """Row-wise maximum over positions and where it was found (ties -> lowest index)"""
    if features.values.ndim != 2:
        raise DimensionError(features.shape, ("K", "P"), "max_pool_argmax")
    if features.shape[1] == 0:
        raise EmptyInput("Max pooling needs at least one position.")
    indices = np.argmax(features.values, axis=1)
    pooled = features.values[np.arange(features.shape[0]), indices]
    return Tensor(pooled), indices


def max_pool_backward(features: Tensor, pooled: Tensor, indices: IntArray):
    features.grad[np.arange(features.shape[0]), indices] += pooled.grad


def _windows(x: FloatArray, window: int) -> FloatArray:
    num_positions = x.shape[0] - window + 1
    dim = x.shape[1]
    strided = np.lib.stride_tricks.sliding_window_view(x, (window, dim))
    return strided.reshape(num_positions, window * dim)


def conv1d(x: Tensor, W: Tensor, b: Tensor, window: int) -> Tensor:
    """Sliding-window convolution over rows of `x` (L x d) -> feature maps (m x P)"""
    if x.values.ndim != 2 or x.shape[0] < window:
        raise DimensionError(x.shape, (window, "d"), "conv1d")
    if W.values.ndim != 2 or W.shape[1] != window * x.shape[1]:
        raise DimensionError(W.shape, x.shape, "conv1d")
    if b.shape != (W.shape[0],):
        raise DimensionError(W.shape, b.shape, "conv1d")
    cols = _windows(x.values, window)
    return Tensor((cols @ W.values.T + b.values).T)


def conv1d_backward(x: Tensor, W: Tensor, b: Tensor, window: int, y: Tensor):
    dy = y.grad
    cols = _windows(x.values, window)
    W.grad += dy @ cols
    b.grad += dy.sum(axis=1)
    num_positions = dy.shape[1]
    dcols = (dy.T @ W.values).reshape(num_positions, window, x.shape[1])
    for offset in range(window):
        x.grad[offset : offset + num_positions] += dcols[:, offset, :]


def dropout(
    x: Tensor, p: float, rng: np.random.Generator | None, train: bool
) -> tuple[Tensor, FloatArray | None]:
    """Inverted dropout; identity outside training"""
    if not train or p <= 0.0:
        return Tensor(x.values.copy()), None
    if rng is None:
        raise ValueError("Dropout at train time needs a random generator")
    keep = rng.random(x.shape) >= p
    mask = keep.astype(x.dtype) / (1.0 - p)
    return Tensor(x.values * mask), mask


def dropout_backward(x: Tensor, y: Tensor, mask: FloatArray | None):
    x.grad += y.grad if mask is None else y.grad * mask


def concat(parts: Sequence[Tensor]) -> Tensor:
    return Tensor(np.concatenate([part.values for part in parts]))


def concat_backward(parts: Sequence[Tensor], out: Tensor):
    start = 0
    for part in parts:
        end = start + part.shape[0]
        part.grad += out.grad[start:end]
        start = end


def embedding_lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    return Tensor(table.values[np.asarray(ids, dtype=np.int64)])


def embedding_backward(table: Tensor, ids: Sequence[int], out: Tensor):
    np.add.at(table.grad, np.asarray(ids, dtype=np.int64), out.grad)


@dataclass
class GRUCache:
    h_prev: Tensor
    x: Tensor
    params: Mapping[str, Tensor]
    z: FloatArray
    r: FloatArray
    h_tilde: FloatArray
    reset_hidden: FloatArray


def gru_step(
    h_prev: Tensor, x: Tensor, params: Mapping[str, Tensor]
) -> tuple[Tensor, GRUCache]:
    """h = (1 - z) * h_prev + z * tanh(W_h x + U_h (r * h_prev) + b_h)"""
    hidden_size = h_prev.shape[0]
    for gate in ("z", "r", "h"):
        W, U, b = params[f"W_{gate}"], params[f"U_{gate}"], params[f"b_{gate}"]
        if W.shape != (hidden_size, x.shape[0]):
            raise DimensionError(W.shape, x.shape, f"gru_step W_{gate}")
        if U.shape != (hidden_size, hidden_size) or b.shape != (hidden_size,):
            raise DimensionError(U.shape, h_prev.shape, f"gru_step U_{gate}")

    hp, xv = h_prev.values, x.values
    z = sigmoid(params["W_z"].values @ xv + params["U_z"].values @ hp + params["b_z"].values)
    r = sigmoid(params["W_r"].values @ xv + params["U_r"].values @ hp + params["b_r"].values)
    reset_hidden = r * hp
    h_tilde = np.tanh(
        params["W_h"].values @ xv + params["U_h"].values @ reset_hidden + params["b_h"].values
    )
    h = (1.0 - z) * hp + z * h_tilde

    return Tensor(h), GRUCache(h_prev, x, params, z, r, h_tilde, reset_hidden)


def gru_step_backward(cache: GRUCache, h: Tensor):
    p = cache.params
    hp, xv = cache.h_prev.values, cache.x.values
    z, r, h_tilde = cache.z, cache.r, cache.h_tilde
    dh = h.grad

    dh_prev = dh * (1.0 - z)
    da_h = dh * z * (1.0 - h_tilde**2)
    da_z = dh * (h_tilde - hp) * z * (1.0 - z)

    p["W_h"].grad += np.outer(da_h, xv)
    p["U_h"].grad += np.outer(da_h, cache.reset_hidden)
    p["b_h"].grad += da_h
    d_reset_hidden = p["U_h"].values.T @ da_h
    dh_prev += d_reset_hidden * r
    da_r = d_reset_hidden * hp * r * (1.0 - r)

    dx = p["W_h"].values.T @ da_h
    for gate, da in (("z", da_z), ("r", da_r)):
        p[f"W_{gate}"].grad += np.outer(da, xv)
        p[f"U_{gate}"].grad += np.outer(da, hp)
        p[f"b_{gate}"].grad += da
        dx += p[f"W_{gate}"].values.T @ da
        dh_prev += p[f"U_{gate}"].values.T @ da

    cache.x.grad += dx
    cache.h_prev.grad += dh_prev
