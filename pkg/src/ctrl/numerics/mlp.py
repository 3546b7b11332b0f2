"""Dense rectifier networks stored as flat parameter tuples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ctrl.errors import NumericError, RejectedInputError
from ctrl.numerics import autodiff as ad
from ctrl.numerics.rng import RngStream


@dataclass(frozen=True)
class Mlp:
    """Weights and biases of an MLP with rectified hidden layers and a linear output.

    ``params`` is ``(W0, b0, W1, b1, ...)`` with ``W_i`` of shape
    ``(layer_dims[i], layer_dims[i + 1])``.
    """

    layer_dims: tuple[int, ...]
    params: tuple[np.ndarray, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or min(dims) < 1:
            raise RejectedInputError(f"bad layer_dims {self.layer_dims}")
        if len(self.params) != 2 * (len(dims) - 1):
            raise RejectedInputError("params must hold one weight and one bias per layer")
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise RejectedInputError(f"layer {i}: got {w.shape}/{b.shape}, want {(fan_in, fan_out)}/{(fan_out,)}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NumericError("mlp", f"layer {i} holds non-finite parameters")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def with_params(self, params: Sequence[np.ndarray]) -> "Mlp":
        return Mlp(self.layer_dims, tuple(params))


def init_mlp(layer_dims: Sequence[int], stream: RngStream, out_scale: float = 1.0) -> Mlp:
    """Uniform(+-1/sqrt(fan_in)) initialisation; ``out_scale`` shrinks the last layer."""
    dims = tuple(int(d) for d in layer_dims)
    params = []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        if i == len(dims) - 2:
            bound *= out_scale
        params.append(stream.uniform(-bound, bound, (fan_in, fan_out)))
        params.append(stream.uniform(-bound, bound, (fan_out,)))
    return Mlp(dims, tuple(params))


def _check_input(net: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != net.in_dim:
        raise RejectedInputError(f"network expects input dim {net.in_dim}, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise RejectedInputError("network input holds NaN/Inf")
    return x


def forward(net: Mlp, x) -> np.ndarray:
    """Plain numpy evaluation; ``x`` is one input vector or a batch of rows."""
    h = _check_input(net, x)
    n_layers = len(net.layer_dims) - 1
    for i in range(n_layers):
        h = h @ net.params[2 * i] + net.params[2 * i + 1]
        if i < n_layers - 1:
            h = np.maximum(h, 0.0)
    if not np.isfinite(h).all():
        raise NumericError("forward")
    return h


def apply(params: Sequence[ad.Tensor], x) -> ad.Tensor:
    """Differentiable evaluation of an MLP given its parameters as tensors."""
    n_layers = len(params) // 2
    h = ad.as_tensor(x)
    for i in range(n_layers):
        h = ad.affine(h, params[2 * i], params[2 * i + 1])
        if i < n_layers - 1:
            h = ad.relu(h)
    return h


def apply_net(net: Mlp, x) -> ad.Tensor:
    """Graph evaluation with the network's parameters held constant (gradient flows to ``x`` only)."""
    if isinstance(x, np.ndarray):
        _check_input(net, x)
    return apply([ad.Tensor(p) for p in net.params], x)
