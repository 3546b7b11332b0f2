"""Adam with bias correction, as a pure function over parameter tuples."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ctrl.errors import NumericError, RejectedInputError


@dataclass(frozen=True)
class AdamState:
    learning_rate: float
    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8


def adam_init(params: Sequence[np.ndarray], learning_rate: float, **kwargs) -> AdamState:
    if not learning_rate > 0:
        raise RejectedInputError(f"learning rate must be positive, got {learning_rate}")
    zeros = tuple(np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params)
    return AdamState(learning_rate, zeros, tuple(z.copy() for z in zeros), **kwargs)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``; inputs are not modified."""
    if not (len(params) == len(grads) == len(state.first_moment)):
        raise RejectedInputError("params, grads and optimizer state disagree in length")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape or m.shape != p.shape:
            raise RejectedInputError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        step = state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.eps_hat)
        p = p - step
        if not np.isfinite(p).all():
            raise NumericError("adam_step")
        new_params.append(p)
        new_m.append(m)
        new_v.append(v)
    return tuple(new_params), replace(state, first_moment=tuple(new_m), second_moment=tuple(new_v), step_count=t)
