# commands/common.py
from __future__ import annotations
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Optional, Sequence
import argparse
import sys

import pandas as pd

from pool_core.errors import ConfigError
from pool_core.export import df_to_csv_bytes, payload_to_json_bytes
from pool_core.repository import save_output
from pool_core.schema import MODES
from pool_core.services.manifest import build_manifest, manifest_bytes
from utils.guards import get_setting

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


@dataclass
class CommandResult:
    exit_code: int
    data: bytes
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    summary: str = ""


def csv_result(df: pd.DataFrame, config: Dict[str, Any], *, exit_code: int = EXIT_OK,
               seed: Optional[int] = None, summary: str = "") -> CommandResult:
    return CommandResult(exit_code, df_to_csv_bytes(df), config, seed, summary)


def json_result(payload: Dict[str, Any], config: Dict[str, Any], *, exit_code: int = EXIT_OK,
                seed: Optional[int] = None, summary: str = "") -> CommandResult:
    return CommandResult(exit_code, payload_to_json_bytes(payload), config, seed, summary)


# ---------- flags compartidos ----------
def add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (relative paths land in POOLDEV_OUT_DIR); "
                                 "a <out>.manifest.json is written next to it. Default: stdout")


def add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: POOLDEV_SEED or 0)")


def add_workers(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes; results do not depend on it (default: POOLDEV_WORKERS or 1)")


def add_mode(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=MODES, default="partition", help="pool sizes: partition or composition")


def add_beta(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, default=None, help="pools per individual in (0,1]")
    p.add_argument("--n", type=int, default=None, help="individuals (with --k, sets beta = k/n)")
    p.add_argument("--k", type=int, default=None, help="pools (with --n, sets beta = k/n)")


def resolve_seed(args) -> int:
    return get_setting("seed", 0, int, explicit=getattr(args, "seed", None))


def resolve_workers(args) -> int:
    return max(1, get_setting("workers", 1, int, explicit=getattr(args, "workers", None)))


def resolve_beta(args):
    """β = k/n cuando vienen ambos; si no, --beta."""
    n, k = getattr(args, "n", None), getattr(args, "k", None)
    if n is not None and k is not None:
        if n < 1 or not 1 <= k <= n:
            raise ConfigError(f"need 1 <= k <= n, got n={n}, k={k}")
        return Fraction(k, n)
    if args.beta is None:
        raise ConfigError("give --beta, or both --n and --k")
    if not 0.0 < args.beta <= 1.0:
        raise ConfigError(f"--beta must lie in (0,1], got {args.beta}")
    return args.beta


# ---------- salida ----------
def emit(result: CommandResult, command: str, argv: Sequence[str], out: Optional[str]) -> None:
    if out:
        manifest = build_manifest(command, result.config, result.seed, argv)
        save_output(out, result.data, manifest_bytes(manifest))
    else:
        sys.stdout.write(result.data.decode("utf-8"))
        sys.stdout.flush()
    if result.summary:
        print(result.summary, file=sys.stderr)
