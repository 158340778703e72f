# commands/estimate.py
from __future__ import annotations

from commands.common import CommandResult, add_beta, add_out, json_result, resolve_beta
from pool_core.errors import ConfigError
from pool_core.rates import pool_bound, prevalence_regime, t_of_sigma

HELP = "estimate the prevalence from the fraction of positive pools"


def register(sub) -> None:
    p = sub.add_parser(
        "estimate", help=HELP,
        description=HELP + ". JSON keys: t_hat, lower_bound, regime, beta, sigma and count_hat when --n is given.",
    )
    p.add_argument("--sigma", type=float, required=True, help="fraction of positive pools in [0,1]")
    add_beta(p)
    add_out(p)
    p.set_defaults(handler=run)


def run(args) -> CommandResult:
    if not 0.0 <= args.sigma <= 1.0:
        raise ConfigError(f"--sigma must lie in [0,1], got {args.sigma}")
    beta = float(resolve_beta(args))
    t_hat = t_of_sigma(args.sigma, beta)
    payload = {
        "sigma": args.sigma,
        "beta": beta,
        "t_hat": t_hat,
        "lower_bound": pool_bound(args.sigma, beta),
        "regime": prevalence_regime(args.sigma),
    }
    if args.n is not None:
        if args.n < 1:
            raise ConfigError(f"--n must be positive, got {args.n}")
        payload["count_hat"] = int(round(args.n * t_hat))
    return json_result(payload, {"sigma": args.sigma, "beta": beta, "n": args.n, "k": args.k})
