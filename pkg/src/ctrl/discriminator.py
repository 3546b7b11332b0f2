"""Energy-based dynamics discriminator.

A network f maps x = (s, a) to a prediction of y = (s', r, d). The energy of a
transition is the residual vector f(x) - y, its distance is the squared norm
of that residual, and the corrected distance of a continuous transition
subtracts the eps-interpolation of its two source residuals before taking the
norm, which makes it exactly zero at eps in {0, 1} whatever the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ctrl.errors import RejectedInputError
from ctrl.mixup import ContinuousTransition, MixedBatch
from ctrl.numerics import AdamState, Mlp, RngStream, adam_init, adam_step, apply, forward, init_mlp, value_and_grad
from ctrl.numerics import autodiff as ad
from ctrl.replay import Transition, TransitionBatch

DTILDE_MODES = ("vector", "scalar")


@dataclass
class RunningMoments:
    """Batched Welford mean/variance, used only when input normalisation is on."""

    dim: int
    count: float = 0.0
    mean: np.ndarray = field(default=None)
    m2: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.m2 is None:
            self.m2 = np.zeros(self.dim)

    def update(self, rows: np.ndarray) -> None:
        n = len(rows)
        if n == 0:
            return
        batch_mean = rows.mean(axis=0)
        batch_m2 = ((rows - batch_mean) ** 2).sum(axis=0)
        total = self.count + n
        delta = batch_mean - self.mean
        self.mean = self.mean + delta * n / total
        self.m2 = self.m2 + batch_m2 + delta**2 * self.count * n / total
        self.count = total

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return np.sqrt(self.m2 / (self.count - 1)) + 1e-6

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.mean) / self.std


def _xy(t) -> tuple[np.ndarray, np.ndarray]:
    """Stack (s, a) and (s', r, d) for a single transition or a batch."""
    s = np.atleast_2d(np.asarray(t.s, dtype=np.float64))
    a = np.atleast_2d(np.asarray(t.a, dtype=np.float64))
    s_next = np.atleast_2d(np.asarray(t.s_next, dtype=np.float64))
    r = np.atleast_1d(np.asarray(t.r, dtype=np.float64))[:, None]
    d = np.atleast_1d(np.asarray(t.d, dtype=np.float64))[:, None]
    return np.concatenate([s, a], axis=1), np.concatenate([s_next, r, d], axis=1)


class Discriminator:
    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        stream: RngStream,
        hidden: tuple[int, ...] = (256, 256),
        learning_rate: float = 3e-4,
        normalize: bool = False,
        net: Mlp | None = None,
    ):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.in_dim = obs_dim + act_dim
        self.out_dim = obs_dim + 2
        self.net = net if net is not None else init_mlp((self.in_dim, *hidden, self.out_dim), stream)
        if self.net.in_dim != self.in_dim or self.net.out_dim != self.out_dim:
            raise RejectedInputError(f"discriminator net must map {self.in_dim} -> {self.out_dim}")
        self.adam: AdamState = adam_init(self.net.params, learning_rate)
        self.normalize = normalize
        self.x_moments = RunningMoments(self.in_dim) if normalize else None
        self.y_moments = RunningMoments(self.out_dim) if normalize else None

    def _prepare(self, x: np.ndarray, y: np.ndarray):
        if x.shape[1] != self.in_dim or y.shape[1] != self.out_dim:
            raise RejectedInputError(
                f"transition dims do not match the discriminator ({self.in_dim} -> {self.out_dim})"
            )
        if self.normalize:
            return self.x_moments.apply(x), self.y_moments.apply(y)
        return x, y

    def energy(self, t) -> np.ndarray:
        """Residual f(x) - y; shape (obs_dim + 2,) for one transition, (n, obs_dim + 2) for a batch."""
        x, y = self._prepare(*_xy(t))
        e = forward(self.net, x) - y
        return e[0] if np.ndim(t.r) == 0 else e

    def distance(self, t) -> np.ndarray | float:
        e = self.energy(t)
        return float(e @ e) if e.ndim == 1 else np.einsum("ij,ij->i", e, e)

    def corrected_distance(self, t: ContinuousTransition | MixedBatch, mode: str = "vector") -> np.ndarray | float:
        """Distance of continuous transitions measured relative to their interpolated source energies.

        ``mode="vector"`` takes the squared norm of E' - mix(E_t, E_t+1);
        ``mode="scalar"`` the absolute gap |d' - mix(d_t, d_t+1)| between squared norms.
        """
        if isinstance(t, ContinuousTransition):
            first, second = t.source
            eps = t.eps
        elif isinstance(t, MixedBatch):
            first, second = t.pairs.first, t.pairs.second
            eps = t.eps[:, None]
        else:
            raise RejectedInputError("corrected_distance needs a continuous transition carrying its source pair")
        e_mix = self.energy(t)
        e_first = self.energy(first)
        e_second = self.energy(second)
        if mode == "vector":
            gap = e_mix - (eps * e_first + (1.0 - eps) * e_second)
            return float(gap @ gap) if gap.ndim == 1 else np.einsum("ij,ij->i", gap, gap)
        if mode == "scalar":
            sq = lambda e: (e * e).sum(axis=-1)  # noqa: E731
            w = np.squeeze(eps, axis=-1) if np.ndim(eps) == 2 else eps
            gap = np.abs(sq(e_mix) - (w * sq(e_first) + (1.0 - w) * sq(e_second)))
            return float(gap) if np.ndim(gap) == 0 else gap
        raise RejectedInputError(f"unknown corrected-distance mode {mode!r}")

    def loss_and_grads(self, batch: TransitionBatch | Transition):
        x, y = _xy(batch)
        x, y = self._prepare(x, y)

        def loss_fn(params):
            resid = ad.sub(apply(params, x), y)
            return ad.mean(ad.sum(ad.square(resid), axis=1))

        return value_and_grad(loss_fn, self.net.params)

    def train_step(self, batch: TransitionBatch) -> float:
        """One Adam step on the mean squared-residual loss; returns the pre-step loss."""
        if len(batch) == 0:
            raise RejectedInputError("discriminator train_step needs a non-empty batch")
        if not np.isin(batch.d, (0.0, 1.0)).all():
            raise RejectedInputError("discriminator trains on authentic transitions only (d in {0, 1})")
        if self.normalize:
            x, y = _xy(batch)
            self.x_moments.update(x)
            self.y_moments.update(y)
        loss, grads = self.loss_and_grads(batch)
        params, self.adam = adam_step(self.net.params, grads, self.adam)
        self.net = self.net.with_params(params)
        return loss

    # -- checkpointing -------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {f"net.{i}": p for i, p in enumerate(self.net.params)}
        out.update({f"adam.m.{i}": m for i, m in enumerate(self.adam.first_moment)})
        out.update({f"adam.v.{i}": v for i, v in enumerate(self.adam.second_moment)})
        out["adam.t"] = np.array(self.adam.step_count)
        if self.normalize:
            for tag, mom in (("x", self.x_moments), ("y", self.y_moments)):
                out[f"norm.{tag}.count"] = np.array(mom.count)
                out[f"norm.{tag}.mean"] = mom.mean
                out[f"norm.{tag}.m2"] = mom.m2
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        n = len(self.net.params)
        self.net = self.net.with_params([np.array(state[f"net.{i}"]) for i in range(n)])
        self.adam = AdamState(
            self.adam.learning_rate,
            tuple(np.array(state[f"adam.m.{i}"]) for i in range(n)),
            tuple(np.array(state[f"adam.v.{i}"]) for i in range(n)),
            int(state["adam.t"]),
        )
        if self.normalize:
            for tag, mom in (("x", self.x_moments), ("y", self.y_moments)):
                mom.count = float(state[f"norm.{tag}.count"])
                mom.mean = np.array(state[f"norm.{tag}.mean"])
                mom.m2 = np.array(state[f"norm.{tag}.m2"])
