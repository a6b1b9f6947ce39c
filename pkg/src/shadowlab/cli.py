"""Command line entry point: ``shadowlab run <experiment> --config <path>``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, InvalidInput, ResourceLimit
from .harness import EXPERIMENTS, load_config, run_experiment, write_outputs

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowlab", description="Inverse-shadowing experiments.")
    parser.add_argument("--list", action="store_true", help="list experiment names and exit")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("list", help="list experiment names")
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment")
    run.add_argument("--config", help="JSON config file (defaults used when omitted)")
    run.add_argument("--out", default="out", help="output root (default: out)")
    run.add_argument("--seed", type=_u64, help="override the config seed")
    run.add_argument("--no-timestamp", action="store_true", help="omit wall-clock fields for byte-identical reports")
    return parser


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", key="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", key="config") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list or args.command == "list":
        for name in EXPERIMENTS:
            print(name)
        return EXIT_OK
    if args.command != "run":
        build_parser().print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.experiment, _read_config(args.config), args.seed)
        report, tables = run_experiment(cfg, timestamp=not args.no_timestamp)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"config error: {exc}{key}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimit as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except InvalidInput as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = write_outputs(report, tables, args.out)
    statuses = [f"{v['id']}={v['status']}" for v in report["verdicts"]]
    summary = "PASS" if report["all_pass"] else "FAIL"
    print(f"{summary} {cfg.experiment} [{', '.join(statuses)}] -> {out}")
    return EXIT_OK if report["all_pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
