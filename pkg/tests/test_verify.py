from fractions import Fraction
import math

import numpy as np
import pytest
from scipy import stats

from pool_core.errors import ConfigError, UnresolvableEventError
from pool_core.rates import corollary_rate, sigma_of_t, t_of_sigma
from pool_core.schema import BinaryMeasure, DecayEvent, PoolLaw, PoolType, RateParams, SimConfig
from pool_core.verify import (
    BOUND_COLUMNS,
    CONVERGENCE_COLUMNS,
    SANDWICH_COLUMNS,
    binomial_convergence,
    bound_audit,
    enumerate_joint_law,
    exact_binomial_rate,
    mc_decay_rate,
    mc_vs_enumeration,
    sandwich_report,
    sandwich_table,
    typical_point_report,
)

P = RateParams(beta=0.2, q1=0.25)   # p* = 0.05


# ---------- binomial exacta ----------
def test_exact_rate_single_trial():
    row = exact_binomial_rate(1, 1.0, P)
    assert row.finite_n_rate == pytest.approx(math.log(20), rel=1e-12)
    assert row.gap == pytest.approx(0.0, abs=1e-12)
    assert row.method == "exact"


def test_binomial_convergence_grid():
    df, fitted, decreasing = binomial_convergence([5000, 500, 2000, 1000], 0.1, P)
    assert list(df.columns) == CONVERGENCE_COLUMNS
    assert list(df["n"]) == [500, 1000, 2000, 5000]
    assert decreasing
    assert (df["gap"] > 0).all()
    assert abs(df["gap"].iloc[-1]) < 0.002
    assert 0 < fitted < 10


def test_exact_rate_rejects_bad_input():
    with pytest.raises(ConfigError):
        exact_binomial_rate(0, 0.1, P)
    with pytest.raises(ConfigError):
        exact_binomial_rate(10, 1.5, P)


# ---------- enumeración ----------
def test_enumeration_two_individuals_one_pool():
    law = enumerate_joint_law(2, 1, 1)   # μ = 1/2
    assert law.table[0, 0] == pytest.approx(0.25)
    assert law.table[1, 1] == pytest.approx(0.5)
    assert law.table[2, 1] == pytest.approx(0.25)
    assert law.table[:, 1].sum() == pytest.approx(0.75)
    assert law.total == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("mode", ["partition", "composition"])
def test_enumeration_positive_marginal_is_binomial(mode):
    law = enumerate_joint_law(8, 3, Fraction(2, 3), mode)   # μ = 1/4
    expected = stats.binom.pmf(np.arange(9), 8, 0.25)
    np.testing.assert_allclose(law.marginal_positive(), expected, atol=1e-13)
    assert law.total == pytest.approx(1.0, abs=1e-12)


def test_enumeration_never_has_more_positive_pools_than_positives():
    law = enumerate_joint_law(7, 4, 1)
    i, j = np.nonzero(law.table)
    assert np.all(i >= j)
    frame = law.as_frame()
    assert frame["probability"].sum() == pytest.approx(1.0)


def test_enumeration_refuses_large_n():
    with pytest.raises(ConfigError):
        enumerate_joint_law(11, 3, 0.5)


def test_zero_prevalence_matches_exactly():
    assert mc_vs_enumeration(6, 2, 0, trials=1000) == 0.0


def test_mc_agrees_with_enumeration():
    assert mc_vs_enumeration(8, 3, Fraction(2, 3), trials=200_000, seed=7) < 0.02


@pytest.mark.slow
def test_mc_agrees_with_enumeration_at_full_budget():
    assert mc_vs_enumeration(8, 3, Fraction(2, 3), trials=1_000_000, seed=1) < 0.01
    assert mc_vs_enumeration(8, 3, Fraction(2, 3), trials=1_000_000, mode="composition", seed=1) < 0.01


# ---------- sándwich ----------
HALF = BinaryMeasure(Fraction(1, 2), Fraction(1, 2))


def test_sandwich_report_by_hand():
    # n=4, k=2, dos positivos: layout (2,2) con prob 1/2 y reparto 1+1 en 4 de 6 casos
    pi = PoolLaw.point_mass(PoolType(2, 1))
    row = sandwich_report(4, 2, HALF, pi)
    assert row["exact"] == pytest.approx(1 / 3, rel=1e-12)
    h = 2.0 + math.log(-math.expm1(-2.0))
    assert row["central"] == pytest.approx(math.exp(-2 * h), rel=1e-12)
    assert row["inside"] is True
    assert row["within_factor"] is True
    assert set(row) == set(SANDWICH_COLUMNS)


def test_sandwich_report_rejects_unattainable_pairs():
    with pytest.raises(ConfigError):
        sandwich_report(4, 2, HALF, PoolLaw.point_mass(PoolType(2, 2)))
    with pytest.raises(ConfigError):
        sandwich_report(4, 2, BinaryMeasure(Fraction(2, 3), Fraction(1, 3)), PoolLaw.point_mass(PoolType(2, 1)))


@pytest.mark.parametrize("mode", ["partition", "composition"])
def test_sandwich_table_conditionals_sum_to_one(mode):
    df = sandwich_table(6, 3, mode)
    assert list(df.columns) == SANDWICH_COLUMNS
    assert df["exact"].between(0, 1).all()
    sums = df.groupby("n_positive")["exact"].sum()
    np.testing.assert_allclose(sums.to_numpy(), 1.0, atol=1e-12)
    assert df["inside"].dtype == bool


# ---------- tasas Monte Carlo ----------
def test_mc_decay_rate_for_prevalence_event():
    rows = mc_decay_rate(DecayEvent("I", t=0.1), [100], beta=0.2, q1=0.25, trials=20_000, seed=3)
    (row,) = rows
    assert row.method == "mc"
    assert row.hits >= 10 and row.trials == 20_000
    assert row.ci_low <= row.finite_n_rate <= row.ci_high
    assert row.annotation == pytest.approx(row.finite_n_rate, abs=0.002)
    assert row.limit_rate == pytest.approx(corollary_rate(0.1, P))


def test_mc_decay_rate_is_reproducible():
    ev = DecayEvent("I", t=0.1)
    a = mc_decay_rate(ev, [50, 100], 0.2, 0.25, 5000, seed=4)
    b = mc_decay_rate(ev, [50, 100], 0.2, 0.25, 5000, seed=4)
    assert a == b


def test_prevalence_event_does_not_depend_on_pooling():
    ev = DecayEvent("I", t=0.1)
    a = mc_decay_rate(ev, [50], 0.2, 0.25, 5000, mode="partition", seed=6)
    b = mc_decay_rate(ev, [50], 0.2, 0.25, 5000, mode="composition", seed=6)
    assert a == b


def test_mc_decay_rate_refuses_rare_events():
    with pytest.raises(UnresolvableEventError) as info:
        mc_decay_rate(DecayEvent("I", t=0.5), [100], 0.2, 0.25, 1000)
    assert info.value.min_trials > 1000


def test_mc_decay_rate_for_pool_events():
    s = sigma_of_t(0.1, 0.2)
    (row_s,) = mc_decay_rate(DecayEvent("sigma", s=s), [50], 0.2, 0.25, 20_000, mode="composition", seed=2)
    assert row_s.limit_rate is None and row_s.gap is None
    assert row_s.annotation == pytest.approx(corollary_rate(t_of_sigma(s, 0.2), P))
    assert row_s.ci_low <= row_s.finite_n_rate <= row_s.ci_high

    (row_b,) = mc_decay_rate(DecayEvent("box", t=0.1, s=s), [50], 0.2, 0.25, 20_000, mode="composition", seed=2)
    assert row_b.hits <= row_s.hits


def test_decay_event_validation():
    with pytest.raises(ConfigError):
        DecayEvent("I")
    with pytest.raises(ConfigError):
        DecayEvent("box", t=0.1)
    with pytest.raises(ConfigError):
        DecayEvent("tail", t=0.1)


# ---------- punto típico y cota ----------
def test_typical_point_report_fields():
    cfg = SimConfig(n=500, k=100, q1=0.25, seed=1)
    report = typical_point_report(cfg, trials=20)
    assert report["trials"] == 20
    assert report["pstar"] == pytest.approx(0.05)
    assert report["I_ci_low"] <= report["mean_I"] <= report["I_ci_high"]
    assert report["t_hat_ci_low"] <= report["mean_t_hat"] <= report["t_hat_ci_high"]
    assert report["status"] in ("pass", "flag")
    assert report["status"] == ("pass" if abs(report["z"]) <= 3 else "flag")


def test_typical_point_report_without_positives():
    report = typical_point_report(SimConfig(n=50, k=10, q1=0, seed=1), trials=5)
    assert report["mean_I"] == 0.0
    assert report["z"] == 0.0
    assert report["status"] == "pass"
    assert report["sigma_pred"] == 0.0
    assert report["z_sigma"] == 0.0
    assert report["sigma_status"] == "pass"


def test_typical_point_report_checks_mean_sigma():
    report = typical_point_report(SimConfig(n=10_000, k=2000, q1=0.25, seed=5), trials=20)
    assert report["sigma_pred"] == pytest.approx(sigma_of_t(report["mean_I"], 0.2))
    assert report["sigma_se"] > 0
    assert report["z_sigma"] == pytest.approx((report["mean_sigma"] - report["sigma_pred"]) / report["sigma_se"])
    assert report["sigma_status"] == ("pass" if abs(report["z_sigma"]) <= 3 else "flag")


def test_bound_audit_finds_no_violations():
    configs = [
        SimConfig(n=30, k=10, q1=1.0, seed=1),
        SimConfig(n=30, k=10, q1=1.0, mode="composition", seed=1),
        SimConfig(n=12, k=12, q1=0.5, seed=2),
    ]
    df = bound_audit(configs, trials=2000)
    assert list(df.columns) == BOUND_COLUMNS
    assert (df["violations"] == 0).all()
    assert (df["min_slack"] >= 0).all()
    # k = n: cada pool es un individuo, así que positivos = pools positivos
    assert df["min_slack"].iloc[2] == 0


@pytest.mark.slow
def test_typical_point_report_at_full_scale():
    report = typical_point_report(SimConfig(n=100_000, k=20_000, q1=0.25, seed=0), trials=100, workers=2)
    assert report["trials"] == 100
    assert report["status"] in ("pass", "flag")
    assert 0.0 <= report["mean_t_hat"] <= 1.0
    assert report["mean_I"] == pytest.approx(0.05, abs=0.002)
