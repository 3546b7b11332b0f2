"""Run configuration: defaults, profiles, flat ``key=value`` files and validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ctrl.envs import ENV_NAMES
from ctrl.errors import UsageError

PROFILES = {
    "desk": {"total_steps": 30_000, "hidden": (64, 64)},
    "paper": {"total_steps": 200_000, "hidden": (256, 256)},
}

# keys that identify a run but not the experimental condition
NON_CONDITION_KEYS = ("seed", "out", "wall_clock")


@dataclass
class RunConfig:
    env: str = "pendulum"
    algo: str = "sac"
    ct: bool = True
    pairing: str = "consecutive"
    ratio: str = "beta"
    beta_fixed: float | None = None
    tolerance: float = 0.1
    seed: int = 0
    profile: str = "desk"
    total_steps: int = 30_000
    eval_interval: int = 1_000
    eval_episodes: int = 10
    warmup_steps: int = 1_000
    batch_size: int = 256
    hidden: tuple[int, ...] = (64, 64)
    buffer_size: int = 1_000_000
    learning_rate: float | None = None
    disc_learning_rate: float = 3e-4
    beta_learning_rate: float = 3e-4
    gamma: float = 0.99
    tau: float = 0.005
    bootstrap_timeouts: bool = True
    actor_raw: bool = False
    disc_normalize: bool = False
    dtilde: str = "vector"
    exclude_terminal_anchors: bool = False
    force_eps: float | None = field(default=None, metadata={"hook": True})
    wall_clock: bool = False
    out: str = "runs/run"

    @property
    def agent_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 1e-3 if self.algo == "td3" else 3e-4

    def validate(self) -> "RunConfig":
        def bad(name, why):
            raise UsageError(f"invalid {name}: {why}", field=name)

        choices = {
            "env": ENV_NAMES,
            "algo": ("sac", "td3"),
            "pairing": ("consecutive", "random"),
            "ratio": ("beta", "uniform"),
            "dtilde": ("vector", "scalar"),
            "profile": tuple(PROFILES),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                bad(name, f"{getattr(self, name)!r} not in {allowed}")
        for name in ("total_steps", "eval_interval", "eval_episodes", "batch_size", "buffer_size"):
            if getattr(self, name) < 1:
                bad(name, "must be positive")
        if self.warmup_steps < 0:
            bad("warmup_steps", "must be non-negative")
        if not self.hidden or min(self.hidden) < 1:
            bad("hidden", "need at least one positive layer width")
        if not self.tolerance > 0:
            bad("tolerance", "must be positive")
        if self.beta_fixed is not None and not 0 < self.beta_fixed <= 1:
            bad("beta_fixed", "must lie in (0, 1]")
        if self.force_eps is not None and not 0 <= self.force_eps <= 1:
            bad("force_eps", "must lie in [0, 1]")
        if not 0 <= self.gamma < 1:
            bad("gamma", "must lie in [0, 1)")
        if not 0 <= self.tau <= 1:
            bad("tau", "must lie in [0, 1]")
        if self.learning_rate is not None and not self.learning_rate > 0:
            bad("learning_rate", "must be positive")
        if not 0 <= self.seed < 2**64:
            bad("seed", "must fit in 64 bits")
        return self

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name}={format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def condition(self) -> dict[str, str]:
        """Settings that define the experimental condition (everything but seed and output location)."""
        return {
            f.name: format_value(getattr(self, f.name))
            for f in dataclasses.fields(self)
            if f.name not in NON_CONDITION_KEYS
        }


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_bool(name: str, text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise UsageError(f"invalid {name}: expected on/off, got {text!r}", field=name)


def parse_value(name: str, text: str):
    """Convert the string form of a setting to its typed value."""
    key = name.replace("-", "_")
    if key not in _FIELDS:
        raise UsageError(f"unknown setting {name!r}", field=name)
    default = _FIELDS[key].default
    text = str(text).strip()
    try:
        if key == "hidden":
            return tuple(int(x) for x in text.replace("x", ",").split(",") if x)
        if key in ("beta_fixed", "force_eps", "learning_rate"):
            return None if text in ("", "none") else float(text)
        if isinstance(default, bool):
            return _parse_bool(key, text)
        if isinstance(default, int):
            return int(float(text)) if "e" in text.lower() else int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise UsageError(f"invalid {key}: cannot parse {text!r}", field=key) from None
    return text


def parse_kv_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        values[key] = parse_value(key, value)
    return values


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}", field="config") from None
    return parse_kv_text(text, str(path))


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the profile, then file values, then explicit overrides."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    profile = merged.get("profile", "desk")
    if profile not in PROFILES:
        raise UsageError(f"invalid profile: {profile!r} not in {tuple(PROFILES)}", field="profile")
    values = dict(PROFILES[profile])
    values.update(merged)
    unknown = set(values) - set(_FIELDS)
    if unknown:
        name = sorted(unknown)[0]
        raise UsageError(f"unknown setting {name!r}", field=name)
    return RunConfig(**values).validate()
