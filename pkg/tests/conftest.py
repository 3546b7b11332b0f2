"""Shared fixtures: a known linear system, finite differences, small builders."""

from __future__ import annotations

import numpy as np
import pytest

from ctrl.replay import ReplayBuffer, Transition

# s' = A s + B a + c, r = w.s + u a0; stable, so rollouts stay bounded
LIN_A = np.array([[0.9, 0.1, 0.0], [0.0, 0.9, 0.1], [0.05, 0.0, 0.85]])
LIN_B = np.array([[0.1], [0.0], [0.2]])
LIN_C = np.array([0.05, -0.02, 0.01])
LIN_W = np.array([0.3, -0.2, 0.1])
LIN_U = 0.05


def linear_episodes(n_episodes: int, length: int, seed: int) -> list[Transition]:
    g = np.random.default_rng(seed)
    out = []
    for e in range(n_episodes):
        s = g.uniform(-1, 1, 3)
        for t in range(length):
            a = g.uniform(-1, 1, 1)
            s2 = LIN_A @ s + LIN_B @ a + LIN_C
            out.append(Transition(s, a, float(LIN_W @ s + LIN_U * a[0]), s2, 0.0, False, e, t))
            s = s2
    return out


def linear_buffer(n_episodes: int, length: int, seed: int) -> ReplayBuffer:
    buf = ReplayBuffer(3, 1, n_episodes * length)
    for t in linear_episodes(n_episodes, length, seed):
        buf.push(t)
    return buf


def central_difference(f, params: list[np.ndarray], h: float = 1e-6) -> list[np.ndarray]:
    grads = []
    for i, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            bumped = [q.copy() for q in params]
            bumped[i][idx] += h
            up = f(bumped)
            bumped[i][idx] -= 2 * h
            down = f(bumped)
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def random_transition(g: np.random.Generator, obs_dim: int = 3, act_dim: int = 1, **kw) -> Transition:
    return Transition(
        g.normal(size=obs_dim),
        g.uniform(-1, 1, act_dim),
        float(g.normal()),
        g.normal(size=obs_dim),
        kw.pop("d", 0.0),
        **kw,
    )


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)
