from fractions import Fraction
import math

import numpy as np
import pytest
from scipy import special
from scipy.optimize import root

from pool_core.errors import SolverError
from pool_core.measures import phi_density, phi_log_density_grid, phi_support
from pool_core.optimize import PROFILE_COLUMNS, phi_sigma_profile, primal_oracle, solve_contraction
from pool_core.rates import corollary_rate, rate_conditional, rate_marginal, sigma_of_t
from pool_core.schema import BinaryMeasure, ContractionProblem, PoolLaw, PoolType, RateParams

PARAMS = RateParams(beta=0.5, q1=0.4)


def _problem(t, sigma, beta=0.5, **kw):
    return ContractionProblem(t=t, sigma=sigma, params=RateParams(beta=beta, q1=0.4), **kw)


def _moments(law):
    A = sum(float(w) * pt.a for pt, w in law)
    B = sum(float(w) * pt.b for pt, w in law)
    neg = sum(float(w) for pt, w in law if pt.negative)
    return A, B, neg


def test_solution_meets_constraints():
    sol = solve_contraction(_problem(0.3, 0.5))
    assert sol.status == "optimal" and sol.feasible
    assert sol.kkt_residual <= 1e-9
    A, B, neg = _moments(sol.argmin_pi)
    assert A == pytest.approx(1.4, abs=1e-8)
    assert B == pytest.approx(0.6, abs=1e-8)
    assert neg == pytest.approx(0.5, abs=1e-8)
    assert sol.value > 0


def test_joint_value_adds_marginal_rate():
    prob = _problem(0.3, 0.5)
    sol = solve_contraction(prob)
    assert sol.joint_value == pytest.approx(rate_marginal(prob.omega, PARAMS) + 0.5 * sol.value, rel=1e-12)


def test_infeasible_below_pool_bound():
    sol = solve_contraction(_problem(0.1, 0.5))
    assert sol.status == "infeasible"
    assert not sol.feasible
    assert math.isinf(sol.value) and math.isinf(sol.joint_value)
    assert sol.argmin_pi is None


def test_infeasible_when_mean_pool_exceeds_support():
    sol = solve_contraction(ContractionProblem(t=0.1, sigma=0.2, params=RateParams(beta=0.2, q1=0.25), m_max=4))
    assert sol.status == "infeasible"


@pytest.mark.parametrize("t,sigma", [(0.0, 0.3), (1.0, 0.5), (0.4, 0.0)])
def test_inconsistent_faces_are_infeasible(t, sigma):
    assert solve_contraction(_problem(t, sigma)).status == "infeasible"


def test_zero_prevalence_face():
    sol = solve_contraction(_problem(0.0, 0.0))
    assert sol.status == "optimal"
    assert all(pt.negative for pt, _ in sol.argmin_pi)
    A, B, _ = _moments(sol.argmin_pi)
    assert A == pytest.approx(2.0, abs=1e-8)
    assert B == 0.0


def test_full_prevalence_face():
    sol = solve_contraction(_problem(1.0, 1.0))
    assert sol.status == "optimal"
    assert all(pt.a == 0 for pt, _ in sol.argmin_pi)


def test_all_pools_positive_face():
    sol = solve_contraction(_problem(0.8, 1.0))
    assert sol.status == "optimal"
    assert not any(pt.negative for pt, _ in sol.argmin_pi)
    A, B, _ = _moments(sol.argmin_pi)
    assert B == pytest.approx(1.6, abs=1e-8)


def test_tight_pool_bound_face():
    # t = βσ: cada pool positivo tiene exactamente un positivo
    sol = solve_contraction(_problem(0.2, 0.4))
    assert sol.status == "optimal"
    assert all(pt.b <= 1 for pt, _ in sol.argmin_pi)
    assert sol.kkt_residual <= 1e-9


def test_tight_negative_moment_face():
    # (1−t)/β = 1−σ: pools negativos de tamaño 1 y pools positivos sin negativos
    sol = solve_contraction(_problem(0.6, 0.2))
    assert sol.status == "optimal"
    for pt, _ in sol.argmin_pi:
        assert (pt.negative and pt.a == 1) or (not pt.negative and pt.a == 0)


@pytest.mark.parametrize("t,sigma,beta", [(0.35, 0.5, 0.5), (0.3, 0.5, 0.5), (0.25, 0.3, 0.6)])
def test_matches_primal_oracle(t, sigma, beta):
    prob = _problem(t, sigma, beta=beta, m_max=3)
    sol = solve_contraction(prob)
    value, x = primal_oracle(prob)
    assert sol.status == "optimal"
    assert x is not None
    assert sol.value == pytest.approx(value, abs=1e-6)


def test_primal_oracle_guards():
    with pytest.raises(SolverError):
        primal_oracle(_problem(0.3, 0.5, m_max=9))
    with pytest.raises(SolverError):
        primal_oracle(_problem(0.0, 0.0, m_max=3))


def test_value_decreases_with_support():
    values = [solve_contraction(_problem(0.3, 0.5, m_max=m)).value for m in (3, 6, 12, 40)]
    assert all(x >= y - 1e-9 for x, y in zip(values, values[1:]))


def test_value_is_below_hand_built_laws():
    beta, t = Fraction(1, 2), Fraction(3, 10)
    params = RateParams(beta=beta, q1=Fraction(2, 5))
    omega = BinaryMeasure.from_prevalence(t)
    candidates = [
        {(1, 0): Fraction(1, 2), (1, 1): Fraction(2, 5), (5, 2): Fraction(1, 10)},
        {(2, 0): Fraction(3, 10), (1, 0): Fraction(1, 5), (0, 1): Fraction(3, 10),
         (6, 1): Fraction(1, 10), (0, 2): Fraction(1, 10)},
        {(1, 0): Fraction(1, 4), (3, 0): Fraction(1, 4), (0, 1): Fraction(2, 5), (4, 2): Fraction(1, 10)},
    ]
    sol = solve_contraction(ContractionProblem(t=0.3, sigma=0.5, params=params))
    assert sol.status == "optimal"
    for cand in candidates:
        law = PoolLaw.from_mapping({PoolType.from_counts(a, b): w for (a, b), w in cand.items()}, probability=True)
        h = rate_conditional(law, omega, params)
        assert math.isfinite(h)
        assert sol.value <= h + 1e-9


def test_recovers_a_known_tilt():
    beta, t, m_max, lam_neg = 0.5, 0.3, 40, 0.7
    a, b = phi_support(m_max)
    logphi = phi_log_density_grid(beta, BinaryMeasure.from_prevalence(t), a, b)

    def tilt(la, lb):
        logits = logphi + la * a + lb * b + lam_neg * (b == 0)
        return np.exp(logits - special.logsumexp(logits))

    def gap(x):
        pi = tilt(*x)
        return [pi @ a - (1 - t) / beta, pi @ b - t / beta]

    found = root(gap, [0.0, 0.0], tol=1e-14)
    assert found.success
    la, lb = found.x
    pi = tilt(la, lb)
    sigma = float(pi[b > 0].sum())
    expected = float(special.rel_entr(pi, np.exp(logphi)).sum())

    sol = solve_contraction(ContractionProblem(t=t, sigma=sigma, params=PARAMS, m_max=m_max))
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(expected, abs=1e-7)
    assert sol.duals == pytest.approx((la, lb, lam_neg), abs=1e-5)


def test_profile_along_typical_curve():
    params = RateParams(beta=0.2, q1=0.25)
    df = phi_sigma_profile([0.05, 0.1, 0.2], None, params)
    assert list(df.columns) == PROFILE_COLUMNS
    assert len(df) == 3
    assert list(df["status"]) == ["optimal"] * 3
    for _, row in df.iterrows():
        assert row["sigma"] == pytest.approx(sigma_of_t(row["t"], 0.2))
        assert row["corollary_rate"] == pytest.approx(corollary_rate(row["t"], params))
        assert row["discrepancy"] == pytest.approx(row["joint_value"] - row["corollary_rate"])


def test_profile_with_fixed_sigma_marks_infeasible_rows():
    df = phi_sigma_profile([0.1, 0.3], 0.5, PARAMS)
    assert list(df["status"]) == ["infeasible", "optimal"]
    assert math.isinf(df["discrepancy"].iloc[0])


def test_argmin_has_tilt_form():
    sol = solve_contraction(_problem(0.3, 0.5))
    la, lb, lneg = sol.duals
    omega = BinaryMeasure.from_prevalence(0.3)
    offsets = [
        math.log(float(w)) - math.log(phi_density(0.5, omega, pt)) - (la * pt.a + lb * pt.b + lneg * pt.negative)
        for pt, w in sol.argmin_pi
        if float(w) > 1e-10
    ]
    assert len(offsets) > 10
    assert max(offsets) - min(offsets) < 1e-8


def test_profile_converges_on_the_whole_typical_curve():
    df = phi_sigma_profile(np.linspace(0, 1, 21), None, RateParams(beta=0.2, q1=0.25))
    assert "max_iter" not in set(df["status"])
    assert (df.loc[df["status"] == "optimal", "kkt_residual"] <= 1e-9).all()


@pytest.mark.parametrize("t", [0.0, 1.0])
def test_trivial_faces_converge_at_default_support(t):
    params = RateParams(beta=0.2, q1=0.25)
    sol = solve_contraction(ContractionProblem(t=t, sigma=t, params=params, max_iter=2000))
    assert sol.status == "optimal"
    assert sol.iterations < 200
