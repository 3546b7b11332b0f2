"""Post-hoc summaries of finished runs: smoothed curves, cross-seed tables, areas under curves."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ctrl.errors import UsageError
from ctrl.harness.config import NON_CONDITION_KEYS, format_value, parse_kv_text
from ctrl.harness.metrics import read_csv

SMOOTHING_WINDOW = 5


def smooth(values, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Centered moving average; near the edges the window shrinks symmetrically."""
    values = np.asarray(values, dtype=np.float64)
    half = window // 2
    n = len(values)
    out = np.empty(n)
    for i in range(n):
        k = min(half, i, n - 1 - i)
        out[i] = values[i - k : i + k + 1].mean()
    return out


def auc(steps, values) -> float:
    """Trapezoidal area under ``values`` over ``steps``."""
    steps = np.asarray(steps, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if len(steps) < 2:
        return 0.0
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(steps)))


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    values = np.asarray(values, dtype=np.float64)
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return float(values.mean()), std


@dataclass
class RunSummary:
    run_dir: Path
    label: str
    condition: dict
    seed: str
    steps: np.ndarray
    returns: np.ndarray
    smoothed: np.ndarray

    @property
    def final(self) -> float:
        return float(self.returns[-1])

    @property
    def auc(self) -> float:
        return auc(self.steps, self.smoothed)


def condition_label(condition: dict) -> str:
    """Short human label such as ``pendulum/sac+ct(R)``."""
    label = condition.get("algo", "?")
    if condition.get("ct") == "on":
        label += "+ct"
        tags = []
        if condition.get("pairing") == "random":
            tags.append("R")
        if condition.get("ratio") == "uniform":
            tags.append("U")
        if condition.get("beta_fixed"):
            tags.append(f"beta={condition['beta_fixed']}")
        if condition.get("tolerance") not in (None, "0.1"):
            tags.append(f"m={condition['tolerance']}")
        if condition.get("force_eps"):
            tags.append(f"eps={condition['force_eps']}")
        if tags:
            label += "(" + ",".join(tags) + ")"
    return f"{condition.get('env', '?')}/{label}"


def load_run(run_dir: str | Path) -> RunSummary:
    run_dir = Path(run_dir)
    config_path = run_dir / "config.txt"
    if not config_path.exists():
        raise UsageError(f"{run_dir} has no config.txt; not a run directory")
    parsed = parse_kv_text(config_path.read_text(), str(config_path))
    raw = {k: format_value(v) for k, v in parsed.items()}
    condition = {k: v for k, v in raw.items() if k not in NON_CONDITION_KEYS}
    rows = read_csv(run_dir / "metrics.csv")
    if not rows:
        raise UsageError(f"{run_dir}/metrics.csv has no evaluation rows")
    steps = np.array([r.step for r in rows], dtype=np.float64)
    returns = np.array([r.eval_return_mean for r in rows])
    return RunSummary(
        run_dir, condition_label(condition), condition, raw.get("seed", ""), steps, returns, smooth(returns)
    )


def group_runs(runs: list[RunSummary]) -> dict[str, list[RunSummary]]:
    groups: dict[tuple, list[RunSummary]] = defaultdict(list)
    for r in runs:
        groups[tuple(sorted(r.condition.items()))].append(r)
    out: dict[str, list[RunSummary]] = {}
    for members in groups.values():
        label = members[0].label
        while label in out:
            label += "'"
        out[label] = members
    return dict(sorted(out.items()))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def summarize(groups: dict[str, list[RunSummary]]) -> list[dict]:
    table = []
    for label, members in groups.items():
        final_mean, final_std = mean_std([m.final for m in members])
        auc_mean, auc_std = mean_std([m.auc for m in members])
        table.append(
            {
                "condition": label,
                "runs": len(members),
                "final_step": int(max(m.steps[-1] for m in members)),
                "final_mean": final_mean,
                "final_std": final_std,
                "auc_mean": auc_mean,
                "auc_std": auc_std,
            }
        )
    return table


def format_table(table: list[dict]) -> str:
    header = f"{'condition':<32} {'runs':>4} {'step':>8} {'final return':>22} {'AUC (smoothed)':>28}"
    lines = [header, "-" * len(header)]
    for row in table:
        final = f"{row['final_mean']:.2f} ± {row['final_std']:.2f}"
        area = f"{row['auc_mean']:.4g} ± {row['auc_std']:.3g}"
        lines.append(f"{row['condition']:<32} {row['runs']:>4} {row['final_step']:>8} {final:>22} {area:>28}")
    return "\n".join(lines) + "\n"


def report(run_dirs, out_dir: str | Path) -> list[dict]:
    """Write ``curves.csv``, ``runs.csv``, ``summary.csv`` and ``summary.txt`` under ``out_dir``."""
    run_dirs = [Path(p) for p in run_dirs]
    if not run_dirs:
        raise UsageError("report needs at least one run directory")
    runs = [load_run(p) for p in run_dirs]
    groups = group_runs(runs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    curve_rows = []
    run_rows = []
    for label, members in groups.items():
        for m in members:
            for s, raw, sm in zip(m.steps, m.returns, m.smoothed):
                curve_rows.append([label, str(m.run_dir), m.seed, int(s), repr(float(raw)), repr(float(sm))])
            run_rows.append([label, str(m.run_dir), m.seed, repr(m.final), repr(m.auc)])
    (out / "curves.csv").write_text(
        _csv_text(["condition", "run", "seed", "step", "eval_return_mean", "smoothed"], curve_rows)
    )
    (out / "runs.csv").write_text(_csv_text(["condition", "run", "seed", "final_return", "auc"], run_rows))
    table = summarize(groups)
    keys = ["condition", "runs", "final_step", "final_mean", "final_std", "auc_mean", "auc_std"]
    (out / "summary.csv").write_text(_csv_text(keys, [[row[k] for k in keys] for row in table]))
    (out / "summary.txt").write_text(format_table(table))
    return table
