"""``flowcast`` command line.

Subcommands: synth, train, predict, evaluate, report.  Failures print one
line ``error: CODE: message`` on stderr and exit with status 1 (2 for
usage errors).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .. import __version__
from ..autodiff import CheckpointError, ContractError
from ..metrics import UndefinedMetricError
from ..models import LEARNED
from .config import RunConfig, load_config
from .pipeline import (
    run_evaluate, run_predict, run_synth, run_train, update_manifest,
)


class UsageError(Exception):
    code = "USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _tags(raw: str | None) -> list[str] | None:
    return [t.strip() for t in raw.split(",") if t.strip()] if raw else None


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # the subcommand copies must not reset flags already given before the subcommand
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    flags = _Parser(add_help=False)
    flags.add_argument("--config", help="INI run configuration", **kw)
    flags.add_argument("--seed", type=int, help="master seed (overrides the config)", **kw)
    flags.add_argument("--out", help="output directory (overrides the config)", **kw)
    flags.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr",
                       **kw)
    return flags


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    p = _Parser(prog="flowcast", description="Multi-station 120-hour streamflow benchmark.",
                parents=[_global_flags(suppress=False)])
    p.add_argument("--version", action="version", version=f"flowcast {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("synth", parents=[common], help="generate synthetic stations")

    t = sub.add_parser("train", parents=[common], help="train one or all learned models")
    g = t.add_mutually_exclusive_group(required=True)
    g.add_argument("--model", help="model tag")
    g.add_argument("--all", action="store_true", help="every learned model in the config")
    t.add_argument("--workers", type=int, default=1, help="parallel training threads")

    pr = sub.add_parser("predict", parents=[common], help="write forecast archives")
    g = pr.add_mutually_exclusive_group(required=True)
    g.add_argument("--model", help="model tag (persistence needs no checkpoint)")
    g.add_argument("--all", action="store_true", help="every model in the config")
    pr.add_argument("--checkpoint", help="checkpoint path (default: the run's own)")
    pr.add_argument("--policy", choices=("persistence", "zero_pad"),
                    help="required extension policy; must match the checkpoint")
    pr.add_argument("--range", dest="range_name", default="test",
                    choices=("train", "val", "test"))

    for name, text in (("evaluate", "score archives and write all report files"),
                       ("report", "re-emit report files from stored archives")):
        e = sub.add_parser(name, parents=[common], help=text)
        e.add_argument("--models", help="comma separated tags (default: all archived)")
        e.add_argument("--report-dir", help="destination (default: <out>/reports)")
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    return cfg


def dispatch(args) -> dict:
    cfg = resolve_config(args)
    t0 = time.perf_counter()
    if args.command == "synth":
        stage, entry = "synth", run_synth(cfg)
    elif args.command == "train":
        tags = [t for t in cfg.models if t in LEARNED] if args.all else [args.model]
        stage, entry = "train", run_train(cfg, tags, args.workers)
    elif args.command == "predict":
        tags = cfg.models if args.all else [args.model]
        stage, entry = "predict", run_predict(cfg, tags, args.checkpoint, args.policy,
                                              args.range_name)
    else:
        stage = args.command
        entry = run_evaluate(cfg, _tags(args.models), args.report_dir)
    timings = {"seconds": time.perf_counter() - t0}
    update_manifest(cfg, stage, entry)
    update_manifest(cfg, "timings", {stage: timings})
    return entry


def _error_code(exc: BaseException) -> str:
    code = getattr(exc, "code", None)
    if isinstance(code, str):
        return code
    for kind, name in ((CheckpointError, "CHECKPOINT"), (UndefinedMetricError, "UNDEFINED_METRIC"),
                       (ContractError, "CONTRACT"), (OSError, "IO"), (ValueError, "INVALID")):
        if isinstance(exc, kind):
            return name
    return "INTERNAL"


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: USAGE: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        entry = dispatch(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one line
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {_error_code(exc)}: {message}", file=sys.stderr)
        if args.verbose:
            logging.getLogger("flowcast").debug("traceback", exc_info=exc)
        return 1
    _summarize(args.command, entry)
    return 0


def _summarize(command: str, entry: dict) -> None:
    if command == "synth":
        print(f"synth: {len(entry['stations'])} stations")
    elif command == "train":
        for tag, r in entry.items():
            print(f"train {tag}: best epoch {r['best_epoch']} of {r['epochs_run']}, "
                  f"val MAE {r['best_val_mae']:.5f} -> {r['checkpoint']}")
    elif command == "predict":
        for tag, r in entry.items():
            print(f"predict {tag}: {sum(r['anchors'].values())} anchors -> {r['dir']}")
    else:
        for tag, scores in entry["unified"].items():
            body = " ".join(f"{k}={v:.4f}" for k, v in scores.items())
            print(f"{command} {tag}: {body}")
        print(f"{command}: wrote {len(entry['files'])} files to {entry['dir']}")


if __name__ == "__main__":
    sys.exit(main())
