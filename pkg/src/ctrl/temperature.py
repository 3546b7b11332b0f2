"""Automatic tuning of the Beta(beta, beta) interpolation temperature.

beta is raised as long as the batch-mean corrected distance stays under the
tolerance m and lowered otherwise, by gradient descent on
``log(beta) * (mean_dtilde - m)`` with mean_dtilde held constant. The
optimised variable is rho = log(beta), so the gradient is simply
``mean_dtilde - m``. After each step beta is clipped to [1e-4, 1] and rho is
reset to match.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ctrl.errors import RejectedInputError
from ctrl.numerics import AdamState, adam_init, adam_step

BETA_FLOOR = 1e-4
BETA_CEILING = 1.0


def beta_loss(beta: float, mean_dtilde: float, m: float) -> float:
    if not 0.0 < beta <= 1.0:
        raise RejectedInputError(f"beta must lie in (0, 1], got {beta}")
    if mean_dtilde < 0:
        raise RejectedInputError("mean corrected distance cannot be negative")
    return math.log(beta) * (mean_dtilde - m)


def beta_loss_grad_rho(mean_dtilde: float, m: float) -> float:
    """d/d(log beta) of :func:`beta_loss`."""
    return mean_dtilde - m


@dataclass
class Temperature:
    beta: float = 1.0
    tolerance: float = 0.1
    learning_rate: float = 3e-4
    fixed: bool = False
    adam: AdamState = field(default=None)

    def __post_init__(self):
        if not BETA_FLOOR <= self.beta <= BETA_CEILING:
            raise RejectedInputError(f"beta must lie in [{BETA_FLOOR}, {BETA_CEILING}], got {self.beta}")
        if not self.tolerance > 0:
            raise RejectedInputError("tolerance must be positive")
        if self.adam is None:
            self.adam = adam_init([np.zeros(())], self.learning_rate)

    @property
    def rho(self) -> float:
        return math.log(self.beta)

    def update(self, batch_dtilde) -> float:
        """One step toward the tolerance; returns the new beta. A fixed temperature ignores the call."""
        batch_dtilde = np.asarray(batch_dtilde, dtype=np.float64)
        if batch_dtilde.size == 0:
            raise RejectedInputError("temperature update needs a non-empty batch of corrected distances")
        if self.fixed:
            return self.beta
        grad = beta_loss_grad_rho(float(batch_dtilde.mean()), self.tolerance)
        (rho,), self.adam = adam_step([np.array(self.rho)], [np.array(grad)], self.adam)
        self.beta = float(min(max(math.exp(float(rho)), BETA_FLOOR), BETA_CEILING))
        return self.beta

    def reset_moments(self) -> None:
        self.adam = adam_init([np.zeros(())], self.learning_rate)

    def forced(self, beta: float) -> "Temperature":
        """Copy with beta overridden and optimizer moments zeroed."""
        out = replace(self, beta=beta, adam=None)
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {
            "beta": np.array(self.beta),
            "adam.m": self.adam.first_moment[0],
            "adam.v": self.adam.second_moment[0],
            "adam.t": np.array(self.adam.step_count),
        }

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.beta = float(state["beta"])
        self.adam = AdamState(
            self.learning_rate,
            (np.array(state["adam.m"]),),
            (np.array(state["adam.v"]),),
            int(state["adam.t"]),
        )
