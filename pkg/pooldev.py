#!/usr/bin/env python3
from __future__ import annotations
from typing import Optional, Sequence
import argparse
import sys

from commands import estimate, optimize, rate, replay, simulate, verify
from commands.common import EXIT_USAGE, emit
from pool_core import __version__
from pool_core.errors import ConfigError, UnresolvableEventError
from utils.debug_console import dbg, set_debug_enabled

COMMANDS = [simulate, estimate, rate, optimize, verify, replay]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pooldev",
        description="Pooled-testing large deviations toolkit. Exit codes: 0 ok, 1 verification failure "
                    "or solver non-convergence, 2 usage error.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug log on stderr (also POOLDEV_DEBUG=1)")
    parser.add_argument("--version", action="version", version=f"pooldev {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for mod in COMMANDS:
        mod.register(sub)
    return parser


def _command_name(args) -> str:
    return f"{args.command} {args.suite}" if getattr(args, "suite", None) else args.command


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.verbose:
        set_debug_enabled(True)

    try:
        if args.command == "replay":
            replayed = replay.build_argv(args)
            dbg("cli.replay", argv=replayed)
            return main(replayed)
        dbg("cli.start", command=_command_name(args), argv=argv)
        result = args.handler(args)
        emit(result, _command_name(args), argv, getattr(args, "out", None))
    except UnresolvableEventError as e:
        print(f"pooldev: error: {e} (min_trials={e.min_trials})", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"pooldev: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    dbg("cli.done", command=_command_name(args), exit_code=result.exit_code)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
