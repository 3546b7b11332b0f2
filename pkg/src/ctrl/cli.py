"""Command line: ``ctrl run``, ``ctrl report`` and ``ctrl sweep``.

Exit status is 0 on success, 2 on a usage or input-format error and 3 when a
run aborts on a non-finite value.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ctrl.errors import UsageError
from ctrl.harness.checkpoint import load_checkpoint
from ctrl.harness.config import RunConfig, build_config, load_config_file, parse_value
from ctrl.harness.metrics import MetricsParseError
from ctrl.harness.report import report
from ctrl.harness.trainer import NumericAbort, Trainer

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

# short spellings for the most used settings
ALIASES = {"total_steps": ["--steps"], "warmup_steps": ["--warmup"], "batch_size": ["--batch"]}
# settings a resumed run may change
RESUMABLE = ("total_steps", "out", "wall_clock")

log = logging.getLogger("ctrl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, *ALIASES.get(f.name, []), dest=f.name, metavar="V", default=None)
    p.add_argument("--config", metavar="FILE", help="flat key=value file; flags override it")


def _overrides(args: argparse.Namespace) -> dict:
    return {
        f.name: parse_value(f.name, getattr(args, f.name))
        for f in dataclasses.fields(RunConfig)
        if getattr(args, f.name, None) is not None
    }


def cmd_run(args) -> int:
    overrides = _overrides(args)
    if args.resume:
        extra = sorted(set(overrides) - set(RESUMABLE))
        if extra or args.config:
            field = extra[0] if extra else "config"
            raise UsageError(f"--resume accepts only {', '.join(RESUMABLE)}; got {field}", field=field)
        path = Path(args.resume)
        trainer = load_checkpoint(path / "checkpoint.npz" if path.is_dir() else path, overrides)
    else:
        file_values = load_config_file(args.config) if args.config else {}
        trainer = Trainer(build_config(file_values, overrides))
    final = trainer.train()
    if final is not None:
        ret = f"{final.eval_return_mean:.2f} ± {final.eval_return_std:.2f}"
        print(f"{trainer.run_dir}: step {final.step} eval return {ret}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out) if args.out else Path(args.runs[0]).parent / "report"
    table = report(args.runs, out)
    sys.stdout.write((out / "summary.txt").read_text())
    log.info("wrote %d conditions to %s", len(table), out)
    return EXIT_OK


def parse_seeds(text: str) -> list[int]:
    """``0..3`` (inclusive) or a comma list such as ``0,2,5``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"invalid seeds: {text!r}", field="seeds") from None
    if not seeds:
        raise UsageError(f"invalid seeds: {text!r} selects nothing", field="seeds")
    return seeds


def cmd_sweep(args) -> int:
    seeds = parse_seeds(args.seeds)
    overrides = _overrides(args)
    overrides.pop("seed", None)
    out_root = Path(overrides.pop("out", None) or "runs/sweep")
    file_values = load_config_file(args.config) if args.config else {}
    build_config(file_values, overrides)  # fail fast before spawning anything

    def flags(seed: int) -> list[str]:
        cmd = [sys.executable, "-m", "ctrl", "run", "--seed", str(seed), "--out", str(out_root / f"seed{seed}")]
        if args.config:
            cmd += ["--config", args.config]
        for name in overrides:
            cmd += ["--" + name.replace("_", "-"), getattr(args, name)]
        return cmd

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        codes = list(pool.map(lambda s: subprocess.call(flags(s)), seeds))
    for seed, code in zip(seeds, codes):
        if code:
            log.error("seed %d exited with status %d", seed, code)
    done = [out_root / f"seed{s}" for s, c in zip(seeds, codes) if c == 0]
    if done:
        report(done, out_root / "report")
        sys.stdout.write((out_root / "report" / "summary.txt").read_text())
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctrl", description="Off-policy RL with continuous-transition augmentation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at every evaluation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="train one agent")
    _add_run_flags(p)
    p.add_argument("--resume", metavar="DIR", help="continue from DIR/checkpoint.npz")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize finished run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", help="output directory (default: <parent of first run>/report)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="run one process per seed, then report")
    p.add_argument("--seeds", required=True, help="e.g. 0..3 or 0,1,2")
    p.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    _add_run_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except (UsageError, MetricsParseError) as exc:
        print(f"ctrl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericAbort as exc:
        print(f"ctrl: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
