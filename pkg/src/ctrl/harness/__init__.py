"""Training loop, evaluation, checkpoints, metrics files and cross-run reports."""

from ctrl.harness.checkpoint import load_checkpoint, save_checkpoint
from ctrl.harness.config import PROFILES, RunConfig, build_config, load_config_file
from ctrl.harness.evaluate import discounted_return, evaluate, run_episode
from ctrl.harness.metrics import METRICS_HEADER, MetricsParseError, MetricsRow, read_csv, write_csv
from ctrl.harness.report import auc, report, smooth
from ctrl.harness.trainer import NumericAbort, Trainer, run

__all__ = [
    "METRICS_HEADER",
    "PROFILES",
    "MetricsParseError",
    "MetricsRow",
    "NumericAbort",
    "RunConfig",
    "Trainer",
    "auc",
    "build_config",
    "discounted_return",
    "evaluate",
    "load_checkpoint",
    "load_config_file",
    "read_csv",
    "report",
    "run",
    "run_episode",
    "save_checkpoint",
    "smooth",
    "write_csv",
]
