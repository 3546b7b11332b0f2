"""Differentiable function approximation core: autodiff, MLPs, Adam, random streams."""

import numpy as np

from ctrl.errors import RejectedInputError
from ctrl.numerics import autodiff
from ctrl.numerics.adam import AdamState, adam_init, adam_step
from ctrl.numerics.autodiff import Tensor, value_and_grad
from ctrl.numerics.mlp import Mlp, apply, apply_net, forward, init_mlp
from ctrl.numerics.rng import RngStream, sample_beta, sample_normal, sample_uniform


def as_vector(values) -> np.ndarray:
    """Validate and convert to a finite 1-D float64 vector."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise RejectedInputError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise RejectedInputError("vector holds NaN/Inf")
    return v


__all__ = [
    "AdamState",
    "Mlp",
    "RngStream",
    "Tensor",
    "adam_init",
    "adam_step",
    "apply",
    "apply_net",
    "as_vector",
    "autodiff",
    "forward",
    "init_mlp",
    "sample_beta",
    "sample_normal",
    "sample_uniform",
    "value_and_grad",
]
