"""Command line entry point: ``halluspan run`` and ``halluspan score``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .gateway import GatewayError
from .evaluation import ScoringError, score_dataset
from .model import DatasetError, load_dataset
from .mrc import detect_mrc
from .mscgh import detect_mscgh
from .runner import run_samples, write_run

logger = logging.getLogger("halluspan")


def _abs(path: str | None) -> str | None:
    return None if path is None else str(Path(path).resolve())


def cmd_run(args: argparse.Namespace) -> int:
    backend = None
    if args.replay_dir and args.endpoint:
        print("error: --replay-dir and --endpoint are mutually exclusive", file=sys.stderr)
        return 2
    if args.replay_dir:
        backend = {"replay_dir": _abs(args.replay_dir)}
    elif args.endpoint:
        backend = {"endpoint": args.endpoint, "model": args.model or ""}
    overrides = {
        "dataset": _abs(args.dataset),
        "output": _abs(args.output),
        "lang": args.lang,
        "cache_dir": _abs(args.cache_dir),
        "workers": args.workers,
        "backend": backend,
    }
    try:
        cfg = load_config(args.config, overrides)
        samples = load_dataset(cfg.dataset, cfg.field_map or None)
        services = cfg.build_services()
    except (ConfigError, DatasetError, GatewayError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if cfg.lang:
        samples = [s for s in samples if s.lang == cfg.lang]
    if cfg.method == "mscgh":
        settings = cfg.mscgh.build()
        detect = lambda sample, warnings: detect_mscgh(sample, settings, services, warnings)  # noqa: E731
    else:
        settings = cfg.mrc.build()
        detect = lambda sample, warnings: detect_mrc(sample, settings, services, warnings)  # noqa: E731

    result = run_samples(samples, detect, cfg.workers)
    manifest = write_run(result, cfg.output, cfg.digest(), cfg.method)
    ok, failed = len(result.predictions), len(result.failed)
    print(f"{ok} succeeded, {failed} failed; predictions: {cfg.output}; manifest: {manifest}")
    return 0 if ok >= 1 else 1


def cmd_score(args: argparse.Namespace) -> int:
    try:
        report = score_dataset(args.predictions, args.gold)
    except ScoringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    table = report.to_table()
    sys.stdout.write(table)
    if args.report:
        Path(args.report).write_text(report.to_json_lines(), encoding="utf-8")
    if args.table:
        Path(args.table).write_text(table, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="halluspan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-v info, -vv debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="label a dataset and write predictions JSONL plus a manifest")
    run.add_argument("config", help="run configuration (JSON)")
    run.add_argument("--dataset")
    run.add_argument("--output")
    run.add_argument("--lang", help="only process samples in this language")
    run.add_argument("--replay-dir", help="serve LLM answers from recorded fixtures")
    run.add_argument("--endpoint", help="chat-completions URL (key from LLM_API_KEY)")
    run.add_argument("--model", help="model name sent to --endpoint")
    run.add_argument("--cache-dir")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    score = sub.add_parser("score", help="score predictions against gold labels")
    score.add_argument("predictions")
    score.add_argument("gold")
    score.add_argument("-o", "--report", help="write JSON-lines report here")
    score.add_argument("--table", help="also write the text table here")
    score.set_defaults(func=cmd_score)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
