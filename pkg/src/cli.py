"""
Command line interface for riskquant batch experiments.

Exit codes: 0 success, 1 runtime failure (the failing stage is named),
2 invalid configuration or usage.
"""
import argparse
import json
import sys
from typing import List, Optional

from src.riskquant import __version__
from src.riskquant.config.experiment import load_config
from src.riskquant.exceptions import ConfigError, RiskQuantError, StageError
from src.riskquant.experiments.runner import run_experiment
from src.riskquant.trainers.models import load_model
from src.riskquant.utils.logging import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskquant", description="Conditional VaR / ES learning experiments")
    sub = parser.add_subparsers(dest="command", metavar="{run,validate,export-model,version}")
    sub.required = True

    run = sub.add_parser("run", help="Run an experiment config and write its artifact directory")
    run.add_argument("config", help="Experiment config (.toml or .json)")
    run.add_argument("--output-dir", "-o", default=None, help="Override the configured artifact directory")

    validate = sub.add_parser("validate", help="Check a config without running it")
    validate.add_argument("config", help="Experiment config (.toml or .json)")

    export = sub.add_parser("export-model", help="Re-emit a saved model in a portable format")
    export.add_argument("model", help="Model JSON file written by a run")
    export.add_argument("--format", choices=["json"], default="json", help="Output format")
    export.add_argument("--output", default=None, help="Write to this file instead of stdout")

    sub.add_parser("version", help="Print the package version")
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg, output_dir=args.output_dir)
    print(str(result.output_dir))
    if not result.ok:
        print(f"Failed checks: {', '.join(result.failed_checks)}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    print(json.dumps(cfg.resolved(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_export_model(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    text = json.dumps(model.to_dict(), indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_version(args: argparse.Namespace) -> int:
    print(__version__)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "validate": cmd_validate,
    "export-model": cmd_export_model,
    "version": cmd_version,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        logger.error("run_failed", stage=exc.stage, error=str(exc.cause))
        print(f"Stage '{exc.stage}' failed: {exc.cause}", file=sys.stderr)
        return EXIT_FAILURE
    except (RiskQuantError, OSError, ValueError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
