"""
Command-Line Dispatcher
Parses arguments, loads the RunConfig with overrides, runs one command and
maps failures onto the documented exit codes.
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional

from ..config.settings import EXIT_CODES, get_settings
from ..core.exceptions import ConfigError, MomentMethodError
from ..tools.config_loader import load_config
from .commands import COMMANDS, cmd_verify

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="moments", description=settings.app_name)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, type=Path, help="JSON RunConfig")
        cmd.add_argument("--out", default=Path("out"), type=Path, help="output directory")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--K", type=int, default=None, help="override the mode truncation")
        cmd.add_argument("--T", type=float, default=None, help="override the control horizon")
        cmd.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        cmd.add_argument("--override-verdict", action="store_true",
                         help="synthesize even when the classifier says no or inconclusive")
        cmd.add_argument("--galerkin-modes", type=int, default=None)
        if name == "verify":
            cmd.add_argument("--solution", type=Path, default=None, help="solution.json (default: <out>/solution.json)")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        logging.getLogger().setLevel(args.log_level)
    overrides = {"seed": args.seed, "K": args.K, "T": args.T, "galerkin_modes": args.galerkin_modes,
                 "override_verdict": True if args.override_verdict else None}
    try:
        config = load_config(args.config, overrides)
        if args.command == "verify":
            return cmd_verify(config, args.out, args.solution)
        return COMMANDS[args.command](config, args.out)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CODES["config"]
    except MomentMethodError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_CODES["error"]
