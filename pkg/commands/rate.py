# commands/rate.py
from __future__ import annotations

import numpy as np
import pandas as pd

from commands.common import CommandResult, add_beta, add_out, csv_result, json_result, resolve_beta
from pool_core.errors import ConfigError
from pool_core.measures import phi_moment_gap
from pool_core.rates import corollary_rate, legendre, rate_marginal, sigma_of_t
from pool_core.schema import BinaryMeasure, RateParams

HELP = "evaluate the prevalence rate function"
GRID_COLUMNS = ["t", "sigma", "corollary_rate", "rate_marginal", "legendre_linear", "legendre_exact"]


def register(sub) -> None:
    p = sub.add_parser(
        "rate", help=HELP,
        description=HELP + ". With --t prints JSON; with --grid N prints a CSV with columns " + ", ".join(GRID_COLUMNS),
    )
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--t", type=float, help="prevalence in [0,1]")
    g.add_argument("--grid", type=int, help="number of equally spaced t values in [0,1]")
    p.add_argument("--q1", type=float, required=True, help="q(1); typical prevalence is beta*q1")
    add_beta(p)
    add_out(p)
    p.set_defaults(handler=run)


def _row(t: float, beta: float, params: RateParams) -> dict:
    omega = BinaryMeasure.from_prevalence(t)
    return {
        "t": t,
        "sigma": sigma_of_t(t, beta),
        "corollary_rate": corollary_rate(t, params),
        "rate_marginal": rate_marginal(omega, params),
        "legendre_linear": legendre(omega, params, "linear"),
        "legendre_exact": legendre(omega, params, "exact"),
    }


def run(args) -> CommandResult:
    beta = resolve_beta(args)
    params = RateParams(beta, args.q1)
    config = {"beta": float(beta), "q1": args.q1, "t": args.t, "grid": args.grid}
    if args.grid is not None:
        if args.grid < 2:
            raise ConfigError(f"--grid needs at least 2 points, got {args.grid}")
        df = pd.DataFrame([_row(float(t), float(beta), params) for t in np.linspace(0.0, 1.0, args.grid)],
                          columns=GRID_COLUMNS)
        return csv_result(df, config)
    if not 0.0 <= args.t <= 1.0:
        raise ConfigError(f"--t must lie in [0,1], got {args.t}")
    row = _row(args.t, float(beta), params)
    payload = {"beta": float(beta), "q1": args.q1, "pstar": float(params.pstar), "rate": row["corollary_rate"], **row}
    # ⟨Φ⟩ frente a ω/β: se informa, no se supone nula
    gap = phi_moment_gap(beta, BinaryMeasure.from_prevalence(args.t))
    payload["phi_moment_gap_l1"] = gap["gap_l1"]
    payload["phi_moment_summation_error_l1"] = gap["summation_error_l1"]
    return json_result(payload, config)
