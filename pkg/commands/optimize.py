# commands/optimize.py
from __future__ import annotations
import math

import numpy as np

from commands.common import EXIT_FAILED, EXIT_OK, CommandResult, add_beta, add_out, csv_result, json_result, resolve_beta
from pool_core.errors import ConfigError
from pool_core.optimize import DEFAULT_M_MAX, PROFILE_COLUMNS, phi_sigma_profile, solve_contraction
from pool_core.rates import corollary_rate, sigma_of_t
from pool_core.schema import ContractionProblem, RateParams
from utils.formatting import fmt_float

HELP = "solve the contraction infimum over (omega, pi) for given t and sigma"


def register(sub) -> None:
    p = sub.add_parser(
        "optimize", help=HELP,
        description=HELP + ". With --t prints the solution as JSON; with --grid N prints the profile CSV ("
        + ", ".join(PROFILE_COLUMNS) + "). Exit 1 if the solver does not converge.",
    )
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--t", type=float, help="prevalence in [0,1]")
    g.add_argument("--grid", type=int, help="number of equally spaced t values in [0,1]")
    p.add_argument("--sigma", type=float, default=None, help="fraction of positive pools (default: sigma_of_t(t))")
    p.add_argument("--q1", type=float, required=True)
    p.add_argument("--m-max", type=int, default=DEFAULT_M_MAX, help="support truncation a + b <= m_max")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=200)
    add_beta(p)
    add_out(p)
    p.set_defaults(handler=run)


def run(args) -> CommandResult:
    beta = resolve_beta(args)
    params = RateParams(beta, args.q1)
    config = {
        "beta": float(beta), "q1": args.q1, "t": args.t, "grid": args.grid, "sigma": args.sigma,
        "m_max": args.m_max, "tol": args.tol, "max_iter": args.max_iter,
    }
    if args.sigma is not None and not 0.0 <= args.sigma <= 1.0:
        raise ConfigError(f"--sigma must lie in [0,1], got {args.sigma}")
    if args.grid is not None:
        if args.grid < 2:
            raise ConfigError(f"--grid needs at least 2 points, got {args.grid}")
        df = phi_sigma_profile(np.linspace(0.0, 1.0, args.grid), args.sigma, params, args.m_max, args.tol)
        failed = int((df["status"] == "max_iter").sum())
        return csv_result(
            df, config,
            exit_code=EXIT_FAILED if failed else EXIT_OK,
            summary=f"optimize: {len(df)} rows, {failed} not converged",
        )

    sigma = sigma_of_t(args.t, float(beta)) if args.sigma is None else args.sigma
    prob = ContractionProblem(t=args.t, sigma=sigma, params=params, m_max=args.m_max, tol=args.tol,
                              max_iter=args.max_iter)
    sol = solve_contraction(prob)
    cr = corollary_rate(args.t, params)
    payload = {
        "t": args.t,
        "sigma": sigma,
        "beta": float(beta),
        "q1": args.q1,
        "m_max": args.m_max,
        "status": sol.status,
        "feasible": sol.feasible,
        "value": sol.value,
        "joint_value": sol.joint_value,
        "corollary_rate": cr,
        "discrepancy": sol.joint_value - cr if sol.feasible else math.inf,
        "duals": {"a": sol.duals[0], "b": sol.duals[1], "neg": sol.duals[2]},
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "tail_mass": sol.tail_mass,
    }
    code = EXIT_FAILED if sol.status == "max_iter" else EXIT_OK
    return json_result(payload, config, exit_code=code,
                       summary=f"optimize: {sol.status}, value = {fmt_float(sol.value)}, residual = {fmt_float(sol.kkt_residual)}")
