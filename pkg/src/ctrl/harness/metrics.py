"""The per-evaluation metrics row and its CSV encoding."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass
from pathlib import Path

METRICS_HEADER = (
    "step",
    "eval_return_mean",
    "eval_return_std",
    "beta",
    "mean_dtilde",
    "disc_loss",
    "critic_loss",
    "actor_loss",
    "alpha",
    "wall_ms",
)


class MetricsParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.path, self.line = str(path), line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class MetricsRow:
    step: int
    eval_return_mean: float
    eval_return_std: float
    beta: float | None = None
    mean_dtilde: float | None = None
    disc_loss: float | None = None
    critic_loss: float | None = None
    actor_loss: float | None = None
    alpha: float | None = None
    wall_ms: float | None = None

    def cells(self) -> list[str]:
        return ["" if v is None else repr(v) if isinstance(v, float) else str(v) for v in astuple(self)]


def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def write_csv(path: str | Path, rows) -> None:
    Path(path).write_text(format_csv(rows))


def read_csv(path: str | Path) -> list[MetricsRow]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MetricsParseError(path, 0, f"unreadable ({exc})") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != METRICS_HEADER:
        raise MetricsParseError(path, 1, f"unexpected header {header}")
    rows = []
    last_step = None
    for lineno, cells in enumerate(reader, 2):
        if len(cells) != len(METRICS_HEADER):
            raise MetricsParseError(path, lineno, f"expected {len(METRICS_HEADER)} fields, got {len(cells)}")
        try:
            values = [int(cells[0])] + [float(c) if c != "" else None for c in cells[1:]]
        except ValueError as exc:
            raise MetricsParseError(path, lineno, str(exc)) from None
        if values[1] is None or values[2] is None:
            raise MetricsParseError(path, lineno, "evaluation columns must not be empty")
        if last_step is not None and values[0] <= last_step:
            raise MetricsParseError(path, lineno, "steps must strictly increase")
        last_step = values[0]
        rows.append(MetricsRow(*values))
    return rows
