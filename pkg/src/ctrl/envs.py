"""Three small continuous-control tasks defined by explicit difference equations.

pendulum
    theta_ddot = (3 g / 2 l) sin(theta) + (3 / (m l^2)) u, g=10, m=1, l=1, dt=0.05,
    semi-implicit Euler (velocity first, clipped to [-8, 8], then angle).
    theta = 0 is upright. u in [-2, 2].
    reward = -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2), evaluated on the
    pre-step state. observation = (cos theta, sin theta, theta_dot).
    reset: theta ~ U[-pi, pi), theta_dot ~ U[-1, 1]. No termination predicate.

reacher
    2-D point mass, v' = v + a dt, p' = p + v' dt, dt=0.05, a in [-1, 1]^2.
    reward = -|p - g| - 0.01 |a|^2 on the pre-step state.
    observation = (p, v, g - p). reset: p, g ~ U[-1, 1]^2, v = 0.
    No termination predicate.

mcar (continuous mountain car)
    v' = clip(v + 0.0015 u - 0.0025 cos(3 x), -0.07, 0.07), x' = clip(x + v', -1.2, 0.6),
    v' = 0 if x' hits the left wall moving left. u in [-1, 1].
    terminates when x' >= 0.45 and v' >= 0. reward = -0.1 u^2 (+100 on termination).
    reset: x ~ U[-0.6, -0.4], v = 0.

Every task ends after 200 steps. ``done`` is 1 on the last step or when the
termination predicate fires; ``timeout`` marks a done caused only by the limit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from ctrl.errors import RejectedInputError, UsageError
from ctrl.numerics import RngStream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    act_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_episode_steps: int = 200

    def __post_init__(self):
        if not np.all(self.action_low < self.action_high):
            raise RejectedInputError("action_low must be below action_high")
        if self.max_episode_steps < 1:
            raise RejectedInputError("max_episode_steps must be >= 1")


@dataclass(frozen=True)
class EnvState:
    spec: EnvSpec
    physical: np.ndarray
    step_index: int = 0
    done: bool = False
    clip_count: int = 0


class StepResult(NamedTuple):
    state: EnvState
    observation: np.ndarray
    reward: float
    done: int
    timeout: bool


# -- pendulum ----------------------------------------------------------------

PENDULUM_G = 10.0
PENDULUM_M = 1.0
PENDULUM_L = 1.0
PENDULUM_DT = 0.05
PENDULUM_MAX_SPEED = 8.0
PENDULUM_MAX_TORQUE = 2.0


def wrap_angle(theta: float) -> float:
    return ((theta + math.pi) % (2.0 * math.pi)) - math.pi


def _pendulum_reset(stream: RngStream) -> np.ndarray:
    return np.array([stream.uniform(-math.pi, math.pi), stream.uniform(-1.0, 1.0)])


def _pendulum_obs(x: np.ndarray) -> np.ndarray:
    return np.array([math.cos(x[0]), math.sin(x[0]), x[1]])


def _pendulum_dynamics(x: np.ndarray, u: np.ndarray):
    theta, theta_dot = float(x[0]), float(x[1])
    torque = float(u[0])
    th = wrap_angle(theta)
    reward = -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque)
    accel = 3.0 * PENDULUM_G / (2.0 * PENDULUM_L) * math.sin(theta) + 3.0 / (PENDULUM_M * PENDULUM_L**2) * torque
    theta_dot = min(max(theta_dot + accel * PENDULUM_DT, -PENDULUM_MAX_SPEED), PENDULUM_MAX_SPEED)
    theta = theta + theta_dot * PENDULUM_DT
    return np.array([theta, theta_dot]), reward, False


# -- reacher -----------------------------------------------------------------

REACHER_DT = 0.05


def _reacher_reset(stream: RngStream) -> np.ndarray:
    p = stream.uniform(-1.0, 1.0, 2)
    g = stream.uniform(-1.0, 1.0, 2)
    return np.concatenate([p, np.zeros(2), g])


def _reacher_obs(x: np.ndarray) -> np.ndarray:
    return np.concatenate([x[0:2], x[2:4], x[4:6] - x[0:2]])


def _reacher_dynamics(x: np.ndarray, u: np.ndarray):
    p, v, g = x[0:2], x[2:4], x[4:6]
    reward = -float(np.linalg.norm(p - g)) - 0.01 * float(u @ u)
    v = v + u * REACHER_DT
    p = p + v * REACHER_DT
    return np.concatenate([p, v, g]), reward, False


# -- continuous mountain car -------------------------------------------------

MCAR_POWER = 0.0015
MCAR_MIN_POS, MCAR_MAX_POS = -1.2, 0.6
MCAR_MAX_SPEED = 0.07
MCAR_GOAL_POS = 0.45
MCAR_GOAL_REWARD = 100.0


def _mcar_reset(stream: RngStream) -> np.ndarray:
    return np.array([stream.uniform(-0.6, -0.4), 0.0])


def _mcar_obs(x: np.ndarray) -> np.ndarray:
    return x.copy()


def _mcar_dynamics(x: np.ndarray, u: np.ndarray):
    position, velocity = float(x[0]), float(x[1])
    force = float(u[0])
    velocity += force * MCAR_POWER - 0.0025 * math.cos(3.0 * position)
    velocity = min(max(velocity, -MCAR_MAX_SPEED), MCAR_MAX_SPEED)
    position += velocity
    position = min(max(position, MCAR_MIN_POS), MCAR_MAX_POS)
    if position == MCAR_MIN_POS and velocity < 0:
        velocity = 0.0
    terminated = position >= MCAR_GOAL_POS and velocity >= 0.0
    reward = -0.1 * force * force + (MCAR_GOAL_REWARD if terminated else 0.0)
    return np.array([position, velocity]), reward, terminated


_REGISTRY = {
    "pendulum": (
        EnvSpec("pendulum", 3, 1, np.array([-PENDULUM_MAX_TORQUE]), np.array([PENDULUM_MAX_TORQUE])),
        _pendulum_reset,
        _pendulum_obs,
        _pendulum_dynamics,
    ),
    "reacher": (
        EnvSpec("reacher", 6, 2, -np.ones(2), np.ones(2)),
        _reacher_reset,
        _reacher_obs,
        _reacher_dynamics,
    ),
    "mcar": (
        EnvSpec("mcar", 2, 1, -np.ones(1), np.ones(1)),
        _mcar_reset,
        _mcar_obs,
        _mcar_dynamics,
    ),
}

ENV_NAMES = tuple(_REGISTRY)


def make_spec(name: str) -> EnvSpec:
    try:
        return _REGISTRY[name][0]
    except KeyError:
        raise UsageError(f"unknown environment {name!r}; choose from {', '.join(ENV_NAMES)}", field="env") from None


def observe(state: EnvState) -> np.ndarray:
    return _REGISTRY[state.spec.name][2](state.physical)


def reset(spec: EnvSpec, seed: int | RngStream) -> tuple[EnvState, np.ndarray]:
    """Draw an initial state. ``seed`` is an int or a stream to consume from."""
    stream = seed if isinstance(seed, RngStream) else RngStream(seed, "env-reset")
    physical = _REGISTRY[spec.name][1](stream)
    state = EnvState(spec, physical)
    return state, observe(state)


def with_physical(state: EnvState, physical) -> EnvState:
    """Copy of ``state`` with the physical state replaced (test and evaluation hook)."""
    return replace(state, physical=np.asarray(physical, dtype=np.float64))


def step(state: EnvState, action) -> StepResult:
    spec = state.spec
    if state.done or state.step_index >= spec.max_episode_steps:
        raise UsageError("step() called on a finished episode; reset first")
    action = np.asarray(action, dtype=np.float64).reshape(-1)
    if action.shape != (spec.act_dim,):
        raise RejectedInputError(f"{spec.name} expects action dim {spec.act_dim}, got {action.shape}")
    if not np.isfinite(action).all():
        raise RejectedInputError("action holds NaN/Inf")
    clip_count = state.clip_count
    clipped = np.clip(action, spec.action_low, spec.action_high)
    if not np.array_equal(clipped, action):
        clip_count += 1
        log.debug("%s: action %s clipped to bounds (%d so far)", spec.name, action, clip_count)
    physical, reward, terminated = _REGISTRY[spec.name][3](state.physical, clipped)
    step_index = state.step_index + 1
    time_up = step_index == spec.max_episode_steps
    done = terminated or time_up
    nxt = EnvState(spec, physical, step_index, done, clip_count)
    return StepResult(nxt, observe(nxt), float(reward), int(done), bool(time_up and not terminated))
