"""The training loop: interaction, replay, and one augmentation iteration per environment step.

Each learning iteration with continuous transitions on runs, in order:
sample consecutive pairs, draw one ratio per pair, build the mixed batch and
its corrected distances, update the agent on the mixed batch, update the
discriminator on the authentic endpoints of the same pairs, then step the
temperature with the corrected distances computed at construction time.
With continuous transitions off the agent trains on plain uniform samples and
no discriminator or temperature exists.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from ctrl import envs
from ctrl.agents import ALGOS
from ctrl.discriminator import Discriminator
from ctrl.errors import NumericError
from ctrl.harness.config import RunConfig
from ctrl.harness.evaluate import evaluate
from ctrl.harness.metrics import MetricsRow, write_csv
from ctrl.mixup import MixedBatch, mix_batch, sample_ratios
from ctrl.numerics import RngStream
from ctrl.replay import ReplayBuffer, Transition, TransitionBatch
from ctrl.temperature import Temperature

log = logging.getLogger(__name__)

STREAM_NAMES = ("agent", "explore", "warmup", "replay", "mix", "disc", "env", "eval")
ACCUMULATED = ("critic_loss", "actor_loss", "disc_loss", "mean_dtilde")


class NumericAbort(RuntimeError):
    """Training hit a NaN/Inf; a checkpoint and diagnostic were written before raising."""

    def __init__(self, step: int, cause: NumericError, run_dir: Path):
        self.step, self.cause, self.run_dir = step, cause, run_dir
        super().__init__(f"numeric failure at step {step} in op '{cause.op}'; state saved under {run_dir}")


def make_agent(config: RunConfig, spec: envs.EnvSpec, stream: RngStream):
    cls = ALGOS[config.algo]
    return cls(
        spec.obs_dim,
        spec.act_dim,
        spec.action_low,
        spec.action_high,
        stream,
        hidden=config.hidden,
        learning_rate=config.agent_learning_rate,
        gamma=config.gamma,
        tau=config.tau,
        bootstrap_timeouts=config.bootstrap_timeouts,
    )


class Trainer:
    def __init__(self, config: RunConfig):
        self.config = config.validate()
        cfg = self.config
        self.spec = envs.make_spec(cfg.env)
        root = RngStream(cfg.seed)
        self.streams = {name: root.child(name) for name in STREAM_NAMES}
        self.agent = make_agent(cfg, self.spec, self.streams["agent"])
        self.buffer = ReplayBuffer(self.spec.obs_dim, self.spec.act_dim, cfg.buffer_size)
        self.disc: Discriminator | None = None
        self.temp: Temperature | None = None
        if cfg.ct:
            self.disc = Discriminator(
                self.spec.obs_dim,
                self.spec.act_dim,
                self.streams["disc"],
                hidden=cfg.hidden,
                learning_rate=cfg.disc_learning_rate,
                normalize=cfg.disc_normalize,
            )
            if cfg.ratio == "beta":
                fixed = cfg.beta_fixed is not None
                self.temp = Temperature(
                    beta=cfg.beta_fixed if fixed else 1.0,
                    tolerance=cfg.tolerance,
                    learning_rate=cfg.beta_learning_rate,
                    fixed=fixed,
                )
        self.env_state, self.obs = envs.reset(self.spec, self.streams["env"])
        self.step = 0
        self.episode_id = 0
        self.updates = 0
        self.rows: list[MetricsRow] = []
        self.timing: list[tuple[int, int]] = []
        self._acc: dict[str, list[float]] = {k: [0.0, 0] for k in ACCUMULATED}
        self._elapsed_before = 0.0
        self._t0 = time.perf_counter()

    @property
    def run_dir(self) -> Path:
        return Path(self.config.out)

    # -- one environment step ------------------------------------------------

    def _action(self) -> np.ndarray:
        if self.step < self.config.warmup_steps:
            return self.streams["warmup"].uniform(self.spec.action_low, self.spec.action_high)
        return self.agent.select_action(self.obs, "explore", self.streams["explore"])

    def env_step(self) -> None:
        action = self._action()
        result = envs.step(self.env_state, action)
        self.buffer.push(
            Transition(
                self.obs,
                action,
                result.reward,
                result.observation,
                float(result.done),
                result.timeout,
                self.episode_id,
                self.env_state.step_index,
            )
        )
        if result.done:
            self.episode_id += 1
            self.env_state, self.obs = envs.reset(self.spec, self.streams["env"])
        else:
            self.env_state, self.obs = result.state, result.observation
        self.step += 1

    # -- one learning iteration ----------------------------------------------

    def _accumulate(self, name: str, value) -> None:
        if value is not None:
            self._acc[name][0] += float(value)
            self._acc[name][1] += 1

    def ratios(self, n: int) -> np.ndarray:
        cfg = self.config
        if cfg.force_eps is not None:
            return np.full(n, cfg.force_eps)
        beta = self.temp.beta if self.temp is not None else 1.0
        return sample_ratios(self.streams["mix"], n, beta, cfg.ratio)

    def construct(self) -> tuple[MixedBatch, np.ndarray]:
        cfg = self.config
        if cfg.pairing == "random":
            pairs = self.buffer.sample_random_pairs(cfg.batch_size, self.streams["replay"])
        else:
            pairs = self.buffer.sample_pairs(cfg.batch_size, self.streams["replay"], cfg.exclude_terminal_anchors)
        mixed = mix_batch(pairs, self.ratios(len(pairs)))
        dtilde = self.disc.corrected_distance(mixed, cfg.dtilde)
        return mixed, dtilde

    def learn(self) -> None:
        cfg = self.config
        if not cfg.ct:
            losses = self.agent.update(self.buffer.sample(cfg.batch_size, self.streams["replay"]))
        else:
            mixed, dtilde = self.construct()
            actor_states = mixed.pairs.first.s if cfg.actor_raw else None
            losses = self.agent.update(mixed, actor_states=actor_states)
            authentic = TransitionBatch.concat(mixed.pairs.first, mixed.pairs.second)
            self._accumulate("disc_loss", self.disc.train_step(authentic))
            if self.temp is not None:
                self.temp.update(dtilde)
            self._accumulate("mean_dtilde", float(dtilde.mean()))
        self._accumulate("critic_loss", losses["critic_loss"])
        self._accumulate("actor_loss", losses["actor_loss"])
        self.updates += 1

    # -- evaluation and bookkeeping --------------------------------------------

    def elapsed_ms(self) -> int:
        return int(round(1000.0 * (self._elapsed_before + time.perf_counter() - self._t0)))

    def _mean(self, name: str) -> float | None:
        total, count = self._acc[name]
        return total / count if count else None

    def record_eval(self) -> MetricsRow:
        cfg = self.config
        mean, std = evaluate(self.agent, self.spec, cfg.eval_episodes, self.streams["eval"])
        wall = self.elapsed_ms()
        row = MetricsRow(
            step=self.step,
            eval_return_mean=mean,
            eval_return_std=std,
            beta=self.temp.beta if self.temp is not None else None,
            mean_dtilde=self._mean("mean_dtilde"),
            disc_loss=self._mean("disc_loss"),
            critic_loss=self._mean("critic_loss"),
            actor_loss=self._mean("actor_loss"),
            alpha=getattr(self.agent, "alpha", None),
            wall_ms=wall if cfg.wall_clock else None,
        )
        self._acc = {k: [0.0, 0] for k in ACCUMULATED}
        self.rows.append(row)
        self.timing.append((self.step, wall))
        log.info("step %d: eval %.2f +- %.2f", row.step, mean, std)
        return row

    def write_outputs(self) -> None:
        out = self.run_dir
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(self.config.to_text())
        write_csv(out / "metrics.csv", self.rows)
        (out / "timing.csv").write_text("step,wall_ms\n" + "".join(f"{s},{w}\n" for s, w in self.timing))

    def save_checkpoint(self, path: str | Path | None = None) -> Path:
        from ctrl.harness.checkpoint import save_checkpoint

        path = Path(path) if path is not None else self.run_dir / "checkpoint.npz"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(self, path)
        return path

    def train(self) -> MetricsRow | None:
        """Advance to ``config.total_steps`` environment steps, evaluating every ``eval_interval``."""
        cfg = self.config
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "config.txt").write_text(cfg.to_text())
        try:
            while self.step < cfg.total_steps:
                self.env_step()
                if self.step > cfg.warmup_steps:
                    self.learn()
                if self.step % cfg.eval_interval == 0:
                    self.record_eval()
                    self.write_outputs()
        except NumericError as exc:
            self.write_outputs()
            self.save_checkpoint()
            (self.run_dir / "diagnostic.txt").write_text(
                f"numeric failure at env step {self.step} (update {self.updates}) in op '{exc.op}': {exc}\n"
            )
            raise NumericAbort(self.step, exc, self.run_dir) from exc
        self.write_outputs()
        self.save_checkpoint()
        return self.rows[-1] if self.rows else None


def run(config: RunConfig) -> MetricsRow | None:
    """Train from scratch under ``config``; outputs land in ``config.out``."""
    return Trainer(config).train()
