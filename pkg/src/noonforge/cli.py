"""Command-line entry point: ``noonforge run`` and ``noonforge validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import SCENARIOS, load_config
from .errors import ConfigError, NumericalGuardError
from .scenarios import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger("noonforge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noonforge", description="Remote N00N-state experiment simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("scenario", help=f"one of: {', '.join(SCENARIOS)}")
    run.add_argument("--config", required=True, help="JSON configuration file")
    run.add_argument("--out", help="output directory (overrides out_dir)")
    run.add_argument("--seed", type=int, help="random seed (overrides seed)")
    run.add_argument("--threads", type=int, help="thread cap for numerical libraries (overrides threads)")

    val = sub.add_parser("validate", help="check a configuration file and exit")
    val.add_argument("--config", required=True, help="JSON configuration file")
    return parser


def _report(kind, exc):
    field = getattr(exc, "field", None)
    where = f" [field: {field}]" if field else ""
    print(f"noonforge: {kind}{where}: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok")
            return EXIT_OK
        overrides = {"scenario": args.scenario}
        for key, value in (("out_dir", args.out), ("seed", args.seed), ("threads", args.threads)):
            if value is not None:
                overrides[key] = value
        cfg = cfg.replace(**overrides)
        summary = run_scenario(cfg)
    except ConfigError as exc:
        _report("configuration error", exc)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        _report("numerical guard", exc)
        return EXIT_NUMERICAL
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
