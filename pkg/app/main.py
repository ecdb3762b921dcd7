"""Command-line entry point."""

import argparse
import sys
from collections.abc import Sequence

from pydantic import ValidationError

from app.cli.commands import attention, ensemble, evaluation, inference
from app.config import get_settings
from app.exceptions import DPPError
from app.utils.logging import get_logger, setup_logging

logger = get_logger(__name__)

COMMAND_GROUPS = (ensemble, inference, attention, evaluation)


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per operation."""
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="dpp",
        description="Determinantal point processes for attention diversification.",
    )
    parser.add_argument("--log-level", default=settings.log_level, help="DEBUG, INFO, WARNING or ERROR")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for group in COMMAND_GROUPS:
        group.register(subparsers, settings)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """
    Parse ``argv`` and run the chosen subcommand.

    Returns:
        0 on success, 1 on a domain or I/O error, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except (DPPError, ValidationError, OSError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
