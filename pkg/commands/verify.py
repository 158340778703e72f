# commands/verify.py
from __future__ import annotations
from fractions import Fraction
from typing import List

import pandas as pd

from commands.common import (
    EXIT_FAILED, EXIT_OK, CommandResult, add_mode, add_seed, add_workers, add_out,
    csv_result, json_result, resolve_seed, resolve_workers,
)
from pool_core import verify
from pool_core.errors import ConfigError
from pool_core.schema import MODES, DecayEvent, RateParams, SimConfig
from utils.formatting import fmt_float, fmt_int, fmt_status

HELP = "verification suites: binomial-ldp, pool-oracle, sandwich, mc-decay, typical, bound"

# (n, k) x modo, con μ = 0.3
DEFAULT_BOUND_CONFIGS = [
    (n, k, Fraction(3 * n, 10 * k), mode)
    for n, k in ((8, 3), (10, 4), (20, 5), (50, 10), (100, 20), (200, 40))
    for mode in MODES
]


def register(sub) -> None:
    p = sub.add_parser("verify", help=HELP, description=HELP + ". Exit 1 when a suite reports failures.")
    suites = p.add_subparsers(dest="suite", required=True)

    s = suites.add_parser("binomial-ldp", help="exact binomial rates against the limit rate (CSV)")
    s.add_argument("--n", type=int, nargs="+", default=[500, 1000, 2000, 5000])
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--q1", type=float, required=True)
    s.add_argument("--tolerance", type=float, default=0.002, help="max |gap| allowed at the largest n")
    add_out(s)
    s.set_defaults(handler=run_binomial)

    s = suites.add_parser("pool-oracle", help="total variation between Monte Carlo and enumeration (JSON)")
    s.add_argument("--n", type=int, required=True, help=f"individuals (<= {verify.ENUM_MAX_N})")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--q1", type=float, required=True)
    s.add_argument("--trials", type=int, default=1_000_000, help=f">= {verify.TV_MIN_TRIALS}")
    s.add_argument("--threshold", type=float, default=0.01)
    add_mode(s)
    add_seed(s)
    add_workers(s)
    add_out(s)
    s.set_defaults(handler=run_pool_oracle)

    s = suites.add_parser("sandwich", help="exact conditional probabilities against the type bounds (CSV)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    add_mode(s)
    add_out(s)
    s.set_defaults(handler=run_sandwich)

    s = suites.add_parser(
        "mc-decay", help="Monte Carlo decay rates with Wilson intervals (CSV)",
        description="Monte Carlo decay rates with Wilson intervals (CSV). The positive count does not depend "
                    "on how individuals are pooled, so --event I draws it as Binomial(n, mu_n) directly and "
                    "ignores --mode; sigma and box events run the pooling simulator.",
    )
    s.add_argument("--event", choices=("I", "sigma", "box"), required=True,
                   help="I: {I >= t} (binomial draw, --mode unused); sigma: {sigma >= s}; box: both")
    s.add_argument("--t", type=float, default=None, help="threshold on I")
    s.add_argument("--s", type=float, default=None, help="threshold on sigma")
    s.add_argument("--ns", type=int, nargs="+", required=True)
    s.add_argument("--beta", type=float, required=True, help="k = round(beta*n)")
    s.add_argument("--q1", type=float, required=True)
    s.add_argument("--trials", type=int, default=1_000_000)
    add_mode(s)
    add_seed(s)
    add_workers(s)
    add_out(s)
    s.set_defaults(handler=run_mc_decay)

    s = suites.add_parser("typical", help="mean t(sigma) against mean I over independent trials (JSON)")
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--k", type=int, default=20_000)
    s.add_argument("--q1", type=float, default=0.25)
    s.add_argument("--trials", type=int, default=100)
    add_mode(s)
    add_seed(s)
    add_workers(s)
    add_out(s)
    s.set_defaults(handler=run_typical)

    s = suites.add_parser("bound", help="count trials violating n*I >= k*sigma (CSV)")
    s.add_argument("--config", action="append", default=None, metavar="N,K,Q1,MODE",
                   help="repeatable; default: 12 built-in configurations")
    s.add_argument("--trials", type=int, default=10_000, help="trials per configuration")
    add_seed(s)
    add_workers(s)
    add_out(s)
    s.set_defaults(handler=run_bound)


# ---------- suites ----------
def run_binomial(args) -> CommandResult:
    params = RateParams(args.beta, args.q1)
    df, fitted, decreasing = verify.binomial_convergence(args.n, args.t, params)
    last_gap = abs(float(df["gap"].iloc[-1]))
    ok = last_gap <= args.tolerance and (decreasing or len(df) == 1)
    summary = (f"verify binomial-ldp: {fmt_status(ok)} |gap|(n={int(df['n'].iloc[-1])}) = {fmt_float(last_gap)}, "
               f"decreasing = {decreasing}, C = {fmt_float(fitted)}")
    config = {"ns": list(args.n), "t": args.t, "beta": args.beta, "q1": args.q1, "tolerance": args.tolerance}
    return csv_result(df, config, exit_code=EXIT_OK if ok else EXIT_FAILED, summary=summary)


def run_pool_oracle(args) -> CommandResult:
    if args.trials < verify.TV_MIN_TRIALS:
        raise ConfigError(f"--trials must be >= {verify.TV_MIN_TRIALS}, got {args.trials}")
    seed = resolve_seed(args)
    tv = verify.mc_vs_enumeration(args.n, args.k, args.q1, args.trials, args.mode, seed, resolve_workers(args))
    ok = tv < args.threshold
    config = {"n": args.n, "k": args.k, "q1": args.q1, "mode": args.mode, "trials": args.trials,
              "threshold": args.threshold, "seed": seed}
    payload = {**config, "tv": tv, "pass": ok}
    return json_result(payload, config, exit_code=EXIT_OK if ok else EXIT_FAILED, seed=seed,
                       summary=f"verify pool-oracle: {fmt_status(ok)} tv = {fmt_float(tv)}")


def run_sandwich(args) -> CommandResult:
    df = verify.sandwich_table(args.n, args.k, args.mode)
    flagged = int((~df["inside"].astype(bool)).sum())
    summary = f"verify sandwich: {len(df)} rows, {flagged} outside the bounds ({verify.SANDWICH_NOTE})"
    return csv_result(df, {"n": args.n, "k": args.k, "mode": args.mode}, summary=summary)


def run_mc_decay(args) -> CommandResult:
    seed = resolve_seed(args)
    event = DecayEvent(kind=args.event, t=args.t, s=args.s)
    rows = verify.mc_decay_rate(event, args.ns, args.beta, args.q1, args.trials, args.mode, seed, resolve_workers(args))
    df = pd.DataFrame([r.to_dict() for r in rows], columns=verify.CONVERGENCE_COLUMNS)
    config = {"event": args.event, "t": args.t, "s": args.s, "ns": list(args.ns), "beta": args.beta,
              "q1": args.q1, "trials": args.trials, "mode": args.mode, "seed": seed}
    return csv_result(df, config, seed=seed, summary=f"verify mc-decay: {len(df)} rows")


def run_typical(args) -> CommandResult:
    seed = resolve_seed(args)
    cfg = SimConfig(n=args.n, k=args.k, q1=args.q1, mode=args.mode, seed=seed)
    report = verify.typical_point_report(cfg, args.trials, resolve_workers(args))
    ok = report["status"] == "pass" and report["sigma_status"] == "pass"
    return json_result(report, {**cfg.to_dict(), "trials": args.trials},
                       exit_code=EXIT_OK if ok else EXIT_FAILED, seed=seed,
                       summary=f"verify typical: {fmt_status(ok)} z = {fmt_float(report['z'])}, "
                               f"z_sigma = {fmt_float(report['z_sigma'])}")


def _parse_config(text: str, seed: int) -> SimConfig:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise ConfigError(f"--config expects N,K,Q1[,MODE], got {text!r}")
    try:
        n, k, q1 = int(parts[0]), int(parts[1]), Fraction(parts[2])
    except ValueError as e:
        raise ConfigError(f"--config {text!r}: {e}") from e
    mode = parts[3] if len(parts) == 4 else "partition"
    return SimConfig(n=n, k=k, q1=q1, mode=mode, seed=seed)


def run_bound(args) -> CommandResult:
    if args.trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {args.trials}")
    seed = resolve_seed(args)
    if args.config:
        configs: List[SimConfig] = [_parse_config(c, seed) for c in args.config]
    else:
        configs = [SimConfig(n=n, k=k, q1=q1, mode=m, seed=seed) for n, k, q1, m in DEFAULT_BOUND_CONFIGS]
    df = verify.bound_audit(configs, args.trials, resolve_workers(args))
    violations = int(df["violations"].sum())
    ok = violations == 0
    config = {"configs": [c.to_dict() for c in configs], "trials": args.trials, "seed": seed}
    return csv_result(df, config, exit_code=EXIT_OK if ok else EXIT_FAILED, seed=seed,
                      summary=f"verify bound: {fmt_status(ok)} {fmt_int(violations)} violations "
                              f"in {fmt_int(args.trials * len(configs))} trials")
