"""Soft actor-critic with a tanh-squashed Gaussian policy and learned entropy temperature."""

from __future__ import annotations

import math

import numpy as np

from ctrl.agents import common
from ctrl.errors import RejectedInputError
from ctrl.numerics import RngStream, adam_init, adam_step, apply, apply_net, forward, init_mlp, value_and_grad
from ctrl.numerics import autodiff as ad

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SQUASH_EPS = 1e-6


class SacAgent:
    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        action_low,
        action_high,
        stream: RngStream,
        hidden: tuple[int, ...] = (256, 256),
        learning_rate: float = 3e-4,
        gamma: float = 0.99,
        tau: float = 0.005,
        init_alpha: float = 0.2,
        bootstrap_timeouts: bool = True,
    ):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.low = np.asarray(action_low, dtype=np.float64)
        self.high = np.asarray(action_high, dtype=np.float64)
        self.scale = (self.high - self.low) / 2.0
        self.center = (self.high + self.low) / 2.0
        self.gamma, self.tau = gamma, tau
        self.bootstrap_timeouts = bootstrap_timeouts
        self.target_entropy = -float(act_dim)
        self.stream = stream

        init = stream.child("init")
        self.actor = init_mlp((obs_dim, *hidden, 2 * act_dim), init)
        self.q1 = init_mlp((obs_dim + act_dim, *hidden, 1), init)
        self.q2 = init_mlp((obs_dim + act_dim, *hidden, 1), init)
        self.q1_target = self.q1
        self.q2_target = self.q2
        self.log_alpha = math.log(init_alpha)

        self.actor_adam = adam_init(self.actor.params, learning_rate)
        self.critic_adam = adam_init(self.q1.params + self.q2.params, learning_rate)
        self.alpha_adam = adam_init([np.zeros(())], learning_rate)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    # -- policy --------------------------------------------------------------

    def _policy(self, actor_params, s, noise: np.ndarray):
        """Reparameterised squashed-Gaussian sample and its log-density, as graph nodes."""
        out = apply(actor_params, s)
        k = self.act_dim
        mean = out[..., :k]
        log_std = ad.maximum(ad.minimum(out[..., k:], LOG_STD_MAX), LOG_STD_MIN)
        u = mean + ad.exp(log_std) * noise
        y = ad.tanh(u)
        action = y * self.scale + self.center
        gauss = -0.5 * noise * noise - _HALF_LOG_2PI - log_std
        squash = ad.log(self.scale * (1.0 - ad.square(y)) + _SQUASH_EPS)
        logp = ad.sum(gauss - squash, axis=-1)
        return action, logp

    def sample_action(self, s: np.ndarray, noise: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        action, logp = self._policy([ad.Tensor(p) for p in self.actor.params], s, noise)
        return action.data, logp.data

    def select_action(self, s, mode: str = "explore", stream: RngStream | None = None) -> np.ndarray:
        s = common.check_state(s, self.obs_dim)
        out = forward(self.actor, s)
        mean = out[..., : self.act_dim]
        if mode == "eval":
            u = mean
        elif mode == "explore":
            log_std = np.clip(out[..., self.act_dim :], LOG_STD_MIN, LOG_STD_MAX)
            noise = (stream or self.stream).normal(mean.shape)
            u = mean + np.exp(log_std) * noise
        else:
            raise RejectedInputError(f"unknown action mode {mode!r}")
        return np.clip(np.tanh(u) * self.scale + self.center, self.low, self.high)

    # -- learning ------------------------------------------------------------

    def critic_target(self, batch, noise: np.ndarray | None = None) -> np.ndarray:
        if noise is None:
            noise = self.stream.normal((len(batch), self.act_dim))
        a_next, logp_next = self.sample_action(batch.s_next, noise)
        x_next = np.concatenate([batch.s_next, a_next], axis=1)
        q_next = np.minimum(forward(self.q1_target, x_next), forward(self.q2_target, x_next))[:, 0]
        bootstrap = q_next - self.alpha * logp_next
        done = common.effective_done(batch, self.bootstrap_timeouts)
        return common.bellman_target(np.asarray(batch.r, dtype=np.float64), done, bootstrap, self.gamma)

    def update(self, batch, actor_states: np.ndarray | None = None) -> dict[str, float]:
        """One gradient step each for critics, actor and alpha, then polyak targets.

        ``actor_states`` overrides the states the actor is trained on (defaults to ``batch.s``).
        """
        common.check_batch(batch, self.obs_dim, self.act_dim)
        n = len(batch)
        y = self.critic_target(batch)[:, None]
        x = np.concatenate([batch.s, batch.a], axis=1)
        n_q = len(self.q1.params)

        def critic_loss(params):
            q1p, q2p = params[:n_q], params[n_q:]
            l1 = ad.mean(ad.square(ad.sub(apply(q1p, x), y)))
            l2 = ad.mean(ad.square(ad.sub(apply(q2p, x), y)))
            return l1 + l2

        c_loss, grads = value_and_grad(critic_loss, self.q1.params + self.q2.params)
        params, self.critic_adam = adam_step(self.q1.params + self.q2.params, grads, self.critic_adam)
        q1p, q2p = common.split(params, n_q)
        self.q1, self.q2 = self.q1.with_params(q1p), self.q2.with_params(q2p)

        s_actor = batch.s if actor_states is None else actor_states
        noise = self.stream.normal((n, self.act_dim))
        alpha = self.alpha

        def actor_loss(params):
            action, logp = self._policy(params, s_actor, noise)
            sa = ad.concat([s_actor, action], axis=1)
            q = ad.minimum(apply_net(self.q1, sa), apply_net(self.q2, sa))
            return ad.mean(alpha * logp - q[:, 0]), float(logp.data.mean())

        a_loss, grads, logp_mean = value_and_grad(actor_loss, self.actor.params, has_aux=True)
        params, self.actor_adam = adam_step(self.actor.params, grads, self.actor_adam)
        self.actor = self.actor.with_params(params)

        alpha_grad = self.alpha_grad(logp_mean)
        (log_alpha,), self.alpha_adam = adam_step([np.array(self.log_alpha)], [np.array(alpha_grad)], self.alpha_adam)
        self.log_alpha = float(log_alpha)

        self.q1_target = common.polyak_update(self.q1_target, self.q1, self.tau)
        self.q2_target = common.polyak_update(self.q2_target, self.q2, self.tau)
        self.updates += 1
        return {"critic_loss": c_loss, "actor_loss": a_loss, "alpha": self.alpha}

    def alpha_loss(self, log_alpha: float, logp_mean: float) -> float:
        return -log_alpha * (logp_mean + self.target_entropy)

    def alpha_grad(self, logp_mean: float) -> float:
        """d/d(log alpha) of :meth:`alpha_loss`; positive (alpha shrinks) when entropy exceeds the target."""
        return -(logp_mean + self.target_entropy)

    # -- checkpointing -------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for name in ("actor", "q1", "q2", "q1_target", "q2_target"):
            out.update(common.mlp_state(name, getattr(self, name)))
        out.update(common.adam_state("actor_adam", self.actor_adam))
        out.update(common.adam_state("critic_adam", self.critic_adam))
        out.update(common.adam_state("alpha_adam", self.alpha_adam))
        out["log_alpha"] = np.array(self.log_alpha)
        out["updates"] = np.array(self.updates)
        return out

    def load_state_dict(self, state: dict) -> None:
        for name in ("actor", "q1", "q2", "q1_target", "q2_target"):
            setattr(self, name, common.load_mlp(name, getattr(self, name), state))
        for name in ("actor_adam", "critic_adam", "alpha_adam"):
            setattr(self, name, common.load_adam(name, getattr(self, name), state))
        self.log_alpha = float(state["log_alpha"])
        self.updates = int(state["updates"])
