"""TD3: twin critics, clipped target-policy smoothing, delayed actor and target updates."""

from __future__ import annotations

import numpy as np

from ctrl.agents import common
from ctrl.errors import RejectedInputError
from ctrl.numerics import RngStream, adam_init, adam_step, apply, apply_net, forward, init_mlp, value_and_grad
from ctrl.numerics import autodiff as ad


class Td3Agent:
    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        action_low,
        action_high,
        stream: RngStream,
        hidden: tuple[int, ...] = (256, 256),
        learning_rate: float = 1e-3,
        gamma: float = 0.99,
        tau: float = 0.005,
        policy_delay: int = 2,
        target_noise_std: float = 0.2,
        noise_clip: float = 0.5,
        exploration_noise_std: float = 0.1,
        bootstrap_timeouts: bool = True,
    ):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.low = np.asarray(action_low, dtype=np.float64)
        self.high = np.asarray(action_high, dtype=np.float64)
        self.scale = (self.high - self.low) / 2.0
        self.center = (self.high + self.low) / 2.0
        self.gamma, self.tau = gamma, tau
        self.policy_delay = policy_delay
        self.target_noise_std = target_noise_std
        self.noise_clip = noise_clip
        self.exploration_noise_std = exploration_noise_std
        self.bootstrap_timeouts = bootstrap_timeouts
        self.stream = stream

        init = stream.child("init")
        self.actor = init_mlp((obs_dim, *hidden, act_dim), init)
        self.q1 = init_mlp((obs_dim + act_dim, *hidden, 1), init)
        self.q2 = init_mlp((obs_dim + act_dim, *hidden, 1), init)
        self.actor_target = self.actor
        self.q1_target = self.q1
        self.q2_target = self.q2
        self.actor_adam = adam_init(self.actor.params, learning_rate)
        self.critic_adam = adam_init(self.q1.params + self.q2.params, learning_rate)
        self.updates = 0
        self.actor_updates = 0

    def _act(self, net, s) -> np.ndarray:
        return np.tanh(forward(net, s)) * self.scale + self.center

    def select_action(self, s, mode: str = "explore", stream: RngStream | None = None) -> np.ndarray:
        s = common.check_state(s, self.obs_dim)
        a = self._act(self.actor, s)
        if mode == "explore":
            noise = (stream or self.stream).normal(a.shape) * self.exploration_noise_std * self.scale
            limit = self.noise_clip * self.scale
            a = a + np.clip(noise, -limit, limit)
        elif mode != "eval":
            raise RejectedInputError(f"unknown action mode {mode!r}")
        return np.clip(a, self.low, self.high)

    def critic_target(self, batch, noise: np.ndarray | None = None) -> np.ndarray:
        if noise is None:
            noise = self.stream.normal((len(batch), self.act_dim))
        limit = self.noise_clip * self.scale
        smoothing = np.clip(noise * self.target_noise_std * self.scale, -limit, limit)
        a_next = np.clip(self._act(self.actor_target, batch.s_next) + smoothing, self.low, self.high)
        x_next = np.concatenate([batch.s_next, a_next], axis=1)
        bootstrap = np.minimum(forward(self.q1_target, x_next), forward(self.q2_target, x_next))[:, 0]
        done = common.effective_done(batch, self.bootstrap_timeouts)
        return common.bellman_target(np.asarray(batch.r, dtype=np.float64), done, bootstrap, self.gamma)

    def update(self, batch, actor_states: np.ndarray | None = None) -> dict[str, float | None]:
        """Critic step every call; actor step and polyak targets every ``policy_delay`` calls."""
        common.check_batch(batch, self.obs_dim, self.act_dim)
        y = self.critic_target(batch)[:, None]
        x = np.concatenate([batch.s, batch.a], axis=1)
        n_q = len(self.q1.params)

        def critic_loss(params):
            l1 = ad.mean(ad.square(ad.sub(apply(params[:n_q], x), y)))
            l2 = ad.mean(ad.square(ad.sub(apply(params[n_q:], x), y)))
            return l1 + l2

        c_loss, grads = value_and_grad(critic_loss, self.q1.params + self.q2.params)
        params, self.critic_adam = adam_step(self.q1.params + self.q2.params, grads, self.critic_adam)
        q1p, q2p = common.split(params, n_q)
        self.q1, self.q2 = self.q1.with_params(q1p), self.q2.with_params(q2p)
        self.updates += 1

        a_loss = None
        if self.updates % self.policy_delay == 0:
            s_actor = batch.s if actor_states is None else actor_states

            def actor_loss(params):
                action = ad.tanh(apply(params, s_actor)) * self.scale + self.center
                q = apply_net(self.q1, ad.concat([s_actor, action], axis=1))
                return -ad.mean(q)

            a_loss, grads = value_and_grad(actor_loss, self.actor.params)
            params, self.actor_adam = adam_step(self.actor.params, grads, self.actor_adam)
            self.actor = self.actor.with_params(params)
            self.actor_updates += 1
            self.actor_target = common.polyak_update(self.actor_target, self.actor, self.tau)
            self.q1_target = common.polyak_update(self.q1_target, self.q1, self.tau)
            self.q2_target = common.polyak_update(self.q2_target, self.q2, self.tau)
        return {"critic_loss": c_loss, "actor_loss": a_loss, "alpha": None}

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for name in ("actor", "q1", "q2", "actor_target", "q1_target", "q2_target"):
            out.update(common.mlp_state(name, getattr(self, name)))
        out.update(common.adam_state("actor_adam", self.actor_adam))
        out.update(common.adam_state("critic_adam", self.critic_adam))
        out["updates"] = np.array(self.updates)
        out["actor_updates"] = np.array(self.actor_updates)
        return out

    def load_state_dict(self, state: dict) -> None:
        for name in ("actor", "q1", "q2", "actor_target", "q1_target", "q2_target"):
            setattr(self, name, common.load_mlp(name, getattr(self, name), state))
        self.actor_adam = common.load_adam("actor_adam", self.actor_adam, state)
        self.critic_adam = common.load_adam("critic_adam", self.critic_adam, state)
        self.updates = int(state["updates"])
        self.actor_updates = int(state["actor_updates"])
