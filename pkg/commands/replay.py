# commands/replay.py
from __future__ import annotations
from typing import List

from pool_core.repository import load_manifest
from pool_core.services.manifest import replay_argv

HELP = "rerun the command stored in a manifest"


def register(sub) -> None:
    p = sub.add_parser("replay", help=HELP, description=HELP + "; outputs are byte-identical to the original run.")
    p.add_argument("manifest", help="<out>.manifest.json, or the output file it accompanies")
    p.add_argument("--out", default=None, help="write here instead of the original --out")
    p.set_defaults(handler=None)


def _strip_out(argv: List[str]) -> List[str]:
    out: List[str] = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


def build_argv(args) -> List[str]:
    argv = replay_argv(load_manifest(args.manifest))
    if args.out:
        argv = _strip_out(argv) + ["--out", args.out]
    return argv
