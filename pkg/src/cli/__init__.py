"""Command surface for the moment-method toolkit."""

from .commands import cmd_analyze, cmd_classify, cmd_quotient, cmd_synthesize, cmd_verify, COMMANDS
from .main import build_parser, run

__all__ = [
    "cmd_analyze",
    "cmd_classify",
    "cmd_synthesize",
    "cmd_verify",
    "cmd_quotient",
    "COMMANDS",
    "build_parser",
    "run",
]
