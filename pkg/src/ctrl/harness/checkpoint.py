"""Versioned checkpoints sufficient for bit-exact resumption.

A checkpoint is an ``.npz`` archive. ``meta`` holds a JSON document with the
format tag and version, the run configuration, counters, every RNG stream
state, the metrics rows written so far and the loss accumulators. Arrays are
stored under ``agent.*``, ``disc.*``, ``temp.*`` and ``env.physical``; the
replay buffer is embedded as its binary dump under ``replay``.
"""

from __future__ import annotations

import dataclasses
import io
import json
from pathlib import Path

import numpy as np

from ctrl import envs
from ctrl.errors import UsageError
from ctrl.harness.config import RunConfig, build_config, parse_kv_text
from ctrl.harness.metrics import MetricsRow
from ctrl.replay import ReplayBuffer

FORMAT = "ctrl-checkpoint"
VERSION = 1


def save_checkpoint(trainer, path: str | Path) -> None:
    arrays: dict[str, np.ndarray] = {}
    for prefix, part in (("agent", trainer.agent), ("disc", trainer.disc), ("temp", trainer.temp)):
        if part is not None:
            arrays.update({f"{prefix}.{k}": np.asarray(v) for k, v in part.state_dict().items()})
    raw = io.BytesIO()
    trainer.buffer.write(raw)
    arrays["replay"] = np.frombuffer(raw.getvalue(), dtype=np.uint8)
    arrays["env.physical"] = trainer.env_state.physical
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "config": trainer.config.to_text(),
        "step": trainer.step,
        "episode_id": trainer.episode_id,
        "updates": trainer.updates,
        "env": {
            "step_index": trainer.env_state.step_index,
            "done": trainer.env_state.done,
            "clip_count": trainer.env_state.clip_count,
        },
        "obs": trainer.obs.tolist(),
        "rng": {name: s.get_state() for name, s in trainer.streams.items()},
        "rows": [dataclasses.astuple(r) for r in trainer.rows],
        "timing": trainer.timing,
        "acc": trainer._acc,
        "elapsed_ms": trainer.elapsed_ms(),
    }
    arrays["meta"] = np.array(json.dumps(meta))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def _sub(data, prefix: str) -> dict[str, np.ndarray]:
    n = len(prefix) + 1
    return {k[n:]: data[k] for k in data.files if k.startswith(prefix + ".")}


def load_checkpoint(path: str | Path, overrides: dict | None = None):
    """Rebuild a :class:`Trainer` from ``path``; ``overrides`` may change e.g. ``total_steps``."""
    from ctrl.harness.trainer import Trainer

    path = Path(path)
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read checkpoint {path}: {exc}", field="resume") from None
    with data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != FORMAT or meta.get("version") != VERSION:
            raise UsageError(f"{path} is not a version-{VERSION} checkpoint", field="resume")
        config = build_config(parse_kv_text(meta["config"], str(path)), overrides)
        trainer = Trainer(config)
        for prefix, part in (("agent", trainer.agent), ("disc", trainer.disc), ("temp", trainer.temp)):
            if part is not None:
                part.load_state_dict(_sub(data, prefix))
        trainer.buffer = ReplayBuffer.read(io.BytesIO(data["replay"].tobytes()))
        env_meta = meta["env"]
        trainer.env_state = envs.EnvState(
            trainer.spec,
            np.array(data["env.physical"]),
            env_meta["step_index"],
            env_meta["done"],
            env_meta["clip_count"],
        )
    trainer.obs = np.array(meta["obs"], dtype=np.float64)
    trainer.step = meta["step"]
    trainer.episode_id = meta["episode_id"]
    trainer.updates = meta["updates"]
    for name, state in meta["rng"].items():
        trainer.streams[name].set_state(state)
    trainer.rows = [MetricsRow(*r) for r in meta["rows"]]
    trainer.timing = [tuple(t) for t in meta["timing"]]
    trainer._acc = {k: list(v) for k, v in meta["acc"].items()}
    trainer._elapsed_before = meta["elapsed_ms"] / 1000.0
    return trainer


def config_of(path: str | Path) -> RunConfig:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
    return build_config(parse_kv_text(meta["config"]))
