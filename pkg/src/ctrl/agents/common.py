"""Pieces shared by the actor-critic learners."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ctrl.errors import RejectedInputError
from ctrl.numerics import AdamState, Mlp


def polyak_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """``(1 - tau) * target + tau * online``, elementwise over all parameters."""
    if target.layer_dims != online.layer_dims:
        raise RejectedInputError(f"polyak: shapes differ {target.layer_dims} vs {online.layer_dims}")
    if not 0.0 <= tau <= 1.0:
        raise RejectedInputError(f"tau must lie in [0, 1], got {tau}")
    return target.with_params([(1.0 - tau) * t + tau * o for t, o in zip(target.params, online.params)])


def bellman_target(r: np.ndarray, done: np.ndarray, bootstrap: np.ndarray, gamma: float) -> np.ndarray:
    """``r + gamma * (1 - done) * bootstrap``; a fractional ``done`` bootstraps partially."""
    return r + gamma * (1.0 - done) * bootstrap


def effective_done(batch, bootstrap_timeouts: bool) -> np.ndarray:
    """Done flags used in targets: time-limit endings count as non-terminal when bootstrapping through them."""
    return np.asarray(batch.terminal if bootstrap_timeouts else batch.d, dtype=np.float64)


def check_batch(batch, obs_dim: int, act_dim: int) -> None:
    if len(batch) == 0:
        raise RejectedInputError("update needs a non-empty batch")
    if batch.s.shape[1] != obs_dim or batch.s_next.shape[1] != obs_dim or batch.a.shape[1] != act_dim:
        raise RejectedInputError("batch dims do not match the agent")
    d = np.asarray(batch.d)
    if not ((d >= 0) & (d <= 1)).all():
        raise RejectedInputError("done flags must lie in [0, 1]")


def check_state(s, obs_dim: int) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != obs_dim:
        raise RejectedInputError(f"state dim {s.shape[-1]} != {obs_dim}")
    if not np.isfinite(s).all():
        raise RejectedInputError("state holds NaN/Inf")
    return s


def mlp_state(prefix: str, net: Mlp) -> dict[str, np.ndarray]:
    return {f"{prefix}.{i}": p for i, p in enumerate(net.params)}


def load_mlp(prefix: str, net: Mlp, state: dict) -> Mlp:
    return net.with_params([np.array(state[f"{prefix}.{i}"]) for i in range(len(net.params))])


def adam_state(prefix: str, adam: AdamState) -> dict[str, np.ndarray]:
    out = {f"{prefix}.m.{i}": m for i, m in enumerate(adam.first_moment)}
    out.update({f"{prefix}.v.{i}": v for i, v in enumerate(adam.second_moment)})
    out[f"{prefix}.t"] = np.array(adam.step_count)
    return out


def load_adam(prefix: str, adam: AdamState, state: dict) -> AdamState:
    n = len(adam.first_moment)
    return AdamState(
        adam.learning_rate,
        tuple(np.array(state[f"{prefix}.m.{i}"]) for i in range(n)),
        tuple(np.array(state[f"{prefix}.v.{i}"]) for i in range(n)),
        int(state[f"{prefix}.t"]),
        adam.beta1,
        adam.beta2,
        adam.eps_hat,
    )


def split(params: Iterable[np.ndarray], n: int) -> tuple[tuple, tuple]:
    params = tuple(params)
    return params[:n], params[n:]
