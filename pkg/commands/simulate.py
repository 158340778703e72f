# commands/simulate.py
from __future__ import annotations

from commands.common import CommandResult, add_mode, add_out, add_seed, add_workers, csv_result, resolve_seed, resolve_workers
from pool_core import aggregator
from pool_core.errors import ConfigError
from pool_core.rates import t_of_sigma
from pool_core.schema import SimConfig
from pool_core.simulate import run_batch
from utils.formatting import fmt_float, fmt_int

HELP = "run the pooled-testing model; one CSV row per trial"
COLUMNS = ["trial_index", "I", "sigma", "n_positive", "n_positive_pools", "t_hat"]


def register(sub) -> None:
    p = sub.add_parser("simulate", help=HELP, description=HELP + ". Columns: " + ", ".join(COLUMNS))
    p.add_argument("--n", type=int, required=True, help="individuals")
    p.add_argument("--k", type=int, required=True, help="pools (1 <= k <= n)")
    p.add_argument("--q1", type=float, required=True, help="q(1); each individual is positive w.p. (k/n)*q1")
    p.add_argument("--trials", type=int, default=1, help="independent trials")
    add_mode(p)
    add_seed(p)
    add_workers(p)
    add_out(p)
    p.set_defaults(handler=run)


def run(args) -> CommandResult:
    if args.trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {args.trials}")
    seed = resolve_seed(args)
    cfg = SimConfig(n=args.n, k=args.k, q1=args.q1, mode=args.mode, seed=seed)
    batch = run_batch(cfg, args.trials, resolve_workers(args))
    table = aggregator.trial_table(batch.summaries, cfg.n, cfg.k, t_of_sigma)
    agg = batch.aggregates
    summary = (
        f"simulate: {fmt_int(args.trials)} trials, mean I = {fmt_float(agg['mean_I'])}, "
        f"mean sigma = {fmt_float(agg['mean_sigma'])}, mean t_hat = {fmt_float(table['t_hat'].mean())}"
    )
    return csv_result(table, {**cfg.to_dict(), "trials": args.trials}, seed=seed, summary=summary)
