"""Policy evaluation on fresh environment instances."""

from __future__ import annotations

import numpy as np

from ctrl import envs
from ctrl.errors import RejectedInputError
from ctrl.numerics import RngStream


def discounted_return(rewards, gamma: float) -> float:
    """sum_k gamma^k r_k."""
    total = 0.0
    for r in reversed(list(rewards)):
        total = float(r) + gamma * total
    return total


def run_episode(policy, spec: envs.EnvSpec, stream: RngStream, start_state=None) -> float:
    """Undiscounted return of one episode with ``policy.select_action(obs, "eval")``."""
    state, obs = envs.reset(spec, stream)
    if start_state is not None:
        state = envs.with_physical(state, start_state)
        obs = envs.observe(state)
    total = 0.0
    while not state.done:
        result = envs.step(state, policy.select_action(obs, "eval"))
        state, obs = result.state, result.observation
        total += result.reward
    return total


def evaluate(policy, spec: envs.EnvSpec, n: int = 10, stream: RngStream | None = None, start_state=None):
    """Mean and (population) std of undiscounted returns over ``n`` eval-mode episodes.

    ``start_state`` forces the physical state after every reset (test hook).
    """
    if n < 1:
        raise RejectedInputError("need at least one evaluation episode")
    stream = stream or RngStream(0, "eval")
    returns = np.array([run_episode(policy, spec, stream, start_state) for _ in range(n)])
    return float(returns.mean()), float(returns.std())
