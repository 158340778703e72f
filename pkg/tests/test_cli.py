import json
import math

import pytest

from pooldev import main
from utils.debug_console import dbg, get_log_text
from utils.guards import get_setting, reset_settings_cache
from pool_core.errors import ConfigError

HEADER = "trial_index,I,sigma,n_positive,n_positive_pools,t_hat"


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------- simulate ----------
def test_simulate_writes_one_row_per_trial(capsys):
    code, out, _ = _run(capsys, "simulate", "--n", "20", "--k", "4", "--q1", "1", "--trials", "5", "--seed", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == HEADER
    assert len(lines) == 6
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2", "3", "4"]


def test_simulate_without_prevalence(capsys):
    code, out, _ = _run(capsys, "simulate", "--n", "10", "--k", "5", "--q1", "0", "--trials", "3")
    assert code == 0
    for line in out.splitlines()[1:]:
        assert line.split(",")[1:] == ["0.0", "0.0", "0", "0", "0.0"]


def test_simulate_is_byte_identical_across_runs_and_workers(tmp_path):
    base = ["simulate", "--n", "30", "--k", "6", "--q1", "0.5", "--trials", "12", "--seed", "8"]
    assert main(base + ["--out", "a.csv"]) == 0
    assert main(base + ["--out", "b.csv", "--workers", "2"]) == 0
    a, b = (tmp_path / "a.csv").read_bytes(), (tmp_path / "b.csv").read_bytes()
    assert a == b
    assert b"\r\n" not in a
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 8
    assert manifest["config"]["n"] == 30


def test_seed_from_environment_matches_flag(monkeypatch, capsys):
    _, by_flag, _ = _run(capsys, "simulate", "--n", "15", "--k", "5", "--q1", "1", "--trials", "4", "--seed", "4")
    monkeypatch.setenv("POOLDEV_SEED", "4")
    _, by_env, _ = _run(capsys, "simulate", "--n", "15", "--k", "5", "--q1", "1", "--trials", "4")
    assert by_flag == by_env


@pytest.mark.parametrize("argv", [
    ["simulate", "--n", "4", "--k", "5", "--q1", "0.1"],
    ["simulate", "--n", "10", "--k", "5", "--q1", "3"],
    ["simulate", "--n", "10", "--k", "5"],
    ["simulate", "--n", "10", "--k", "5", "--q1", "1", "--trials", "0"],
    ["estimate", "--sigma", "1.5", "--beta", "0.2"],
    ["estimate", "--sigma", "0.5"],
    ["rate", "--t", "0.1", "--grid", "5", "--beta", "0.2", "--q1", "0.25"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = _run(capsys, *argv)
    assert code == 2
    assert err


def test_bad_worker_setting_is_a_usage_error(monkeypatch, capsys):
    monkeypatch.setenv("POOLDEV_WORKERS", "many")
    code, _, err = _run(capsys, "simulate", "--n", "10", "--k", "5", "--q1", "1")
    assert code == 2
    assert "workers" in err


# ---------- estimate / rate ----------
def test_estimate_example(capsys):
    code, out, _ = _run(capsys, "estimate", "--sigma", "0.5", "--beta", "0.2")
    assert code == 0
    payload = json.loads(out)
    assert payload["t_hat"] == pytest.approx(0.137286, abs=1e-5)
    assert payload["lower_bound"] == pytest.approx(0.1)
    assert payload["regime"] == "some"
    assert "count_hat" not in payload


def test_estimate_with_counts(capsys):
    code, out, _ = _run(capsys, "estimate", "--sigma", "0.5", "--n", "1000", "--k", "200")
    payload = json.loads(out)
    assert code == 0
    assert payload["beta"] == pytest.approx(0.2)
    assert payload["count_hat"] == 137


def test_rate_vanishes_at_typical_prevalence(capsys):
    code, out, _ = _run(capsys, "rate", "--t", "0.05", "--beta", "0.2", "--q1", "0.25")
    payload = json.loads(out)
    assert code == 0
    assert payload["rate"] == 0.0
    assert payload["pstar"] == pytest.approx(0.05)
    # ⟨Φ⟩ − ω/β en norma L1: (1/β) e^{−1/β} / (1 − e^{−1/β})
    assert payload["phi_moment_gap_l1"] == pytest.approx(5 * math.exp(-5) / -math.expm1(-5), rel=1e-10)
    assert payload["phi_moment_summation_error_l1"] < 1e-10


def test_rate_grid(capsys):
    code, out, _ = _run(capsys, "rate", "--grid", "5", "--beta", "0.5", "--q1", "1")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "t,sigma,corollary_rate,rate_marginal,legendre_linear,legendre_exact"
    assert len(lines) == 6


# ---------- optimize ----------
def test_optimize_solution(capsys):
    code, out, _ = _run(capsys, "optimize", "--t", "0.3", "--sigma", "0.5", "--beta", "0.5", "--q1", "0.4")
    payload = json.loads(out)
    assert code == 0
    assert payload["status"] == "optimal"
    assert set(payload["duals"]) == {"a", "b", "neg"}
    assert payload["kkt_residual"] <= 1e-9


def test_optimize_infeasible_is_not_a_failure(capsys):
    code, out, _ = _run(capsys, "optimize", "--t", "0.1", "--sigma", "0.5", "--beta", "0.5", "--q1", "0.4")
    payload = json.loads(out)
    assert code == 0
    assert payload["status"] == "infeasible"
    assert payload["value"] == "inf"


@pytest.mark.parametrize("t", ["0", "1"])
def test_optimize_trivial_faces_converge(t, capsys):
    code, out, _ = _run(capsys, "optimize", "--t", t, "--beta", "0.2", "--q1", "0.25")
    assert code == 0
    assert json.loads(out)["status"] == "optimal"


def test_optimize_non_convergence_exits_1(capsys):
    code, out, _ = _run(capsys, "optimize", "--t", "0.3", "--sigma", "0.5", "--beta", "0.5", "--q1", "0.4",
                        "--max-iter", "1")
    assert code == 1
    assert json.loads(out)["status"] == "max_iter"


# ---------- verify ----------
def test_verify_binomial_ldp(capsys):
    code, out, err = _run(capsys, "verify", "binomial-ldp", "--t", "0.1", "--beta", "0.2", "--q1", "0.25")
    assert code == 0
    assert len(out.splitlines()) == 5
    assert "PASS" in err


def test_verify_binomial_ldp_fails_on_tight_tolerance(capsys):
    code, _, err = _run(capsys, "verify", "binomial-ldp", "--t", "0.1", "--beta", "0.2", "--q1", "0.25",
                        "--tolerance", "1e-6")
    assert code == 1
    assert "FAIL" in err


def test_verify_pool_oracle(capsys):
    code, out, _ = _run(capsys, "verify", "pool-oracle", "--n", "6", "--k", "2", "--q1", "0.5",
                        "--trials", "100000", "--threshold", "0.02", "--seed", "1")
    payload = json.loads(out)
    assert code == 0
    assert payload["pass"] is True
    assert payload["tv"] < 0.02


def test_verify_pool_oracle_needs_enough_trials(capsys):
    code, _, _ = _run(capsys, "verify", "pool-oracle", "--n", "6", "--k", "2", "--q1", "0.5", "--trials", "1000")
    assert code == 2


def test_verify_sandwich(capsys):
    code, out, err = _run(capsys, "verify", "sandwich", "--n", "4", "--k", "2")
    assert code == 0
    assert out.splitlines()[0] == "n,k,n_positive,p2,exact,central,lower,upper,log_ratio,inside,within_factor"
    assert "o(1)" in err


def test_verify_mc_decay_unresolvable(capsys):
    code, _, err = _run(capsys, "verify", "mc-decay", "--event", "I", "--t", "0.5", "--ns", "100",
                        "--beta", "0.2", "--q1", "0.25", "--trials", "1000")
    assert code == 2
    assert "min_trials" in err


def test_verify_mc_decay_rows(capsys):
    code, out, _ = _run(capsys, "verify", "mc-decay", "--event", "I", "--t", "0.1", "--ns", "50", "100",
                        "--beta", "0.2", "--q1", "0.25", "--trials", "5000")
    lines = out.splitlines()
    assert code == 0
    assert lines[0].startswith("n,finite_n_rate,limit_rate,gap,method")
    assert len(lines) == 3


def test_verify_typical_reports_sigma_check(capsys):
    code, out, _ = _run(capsys, "verify", "typical", "--n", "500", "--k", "100", "--trials", "10", "--seed", "2")
    payload = json.loads(out)
    assert {"sigma_pred", "sigma_se", "z_sigma", "sigma_status"} <= set(payload)
    ok = payload["status"] == "pass" and payload["sigma_status"] == "pass"
    assert code == (0 if ok else 1)


def test_verify_bound(capsys):
    code, out, _ = _run(capsys, "verify", "bound", "--config", "20,5,1", "--config", "20,5,1,composition",
                        "--trials", "500")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "n,k,q1,mode,seed,trials,violations,min_slack"
    assert len(lines) == 3


def test_verify_bound_rejects_malformed_config(capsys):
    code, _, _ = _run(capsys, "verify", "bound", "--config", "20,5")
    assert code == 2


# ---------- replay ----------
def test_replay_reproduces_output(tmp_path):
    assert main(["rate", "--grid", "4", "--beta", "0.2", "--q1", "0.25", "--out", "grid.csv"]) == 0
    assert main(["replay", "grid.csv", "--out", "again.csv"]) == 0
    assert (tmp_path / "grid.csv").read_bytes() == (tmp_path / "again.csv").read_bytes()


def test_replay_without_manifest_is_a_usage_error(capsys):
    code, _, err = _run(capsys, "replay", "missing.csv")
    assert code == 2
    assert "manifest" in err


# ---------- ajustes y log ----------
def test_setting_precedence(tmp_path, monkeypatch):
    (tmp_path / "pooldev.toml").write_text("[defaults]\nseed = 7\n", encoding="utf-8")
    reset_settings_cache()
    assert get_setting("seed", 0, int) == 7
    monkeypatch.setenv("POOLDEV_SEED", "5")
    assert get_setting("seed", 0, int) == 5
    assert get_setting("seed", 0, int, explicit=9) == 9
    assert get_setting("workers", 1, int) == 1


def test_config_file_from_environment(tmp_path, monkeypatch):
    other = tmp_path / "elsewhere.toml"
    other.write_text("[defaults]\nworkers = 3\n", encoding="utf-8")
    monkeypatch.setenv("POOLDEV_CONFIG", str(other))
    reset_settings_cache()
    assert get_setting("workers", 1, int) == 3


def test_invalid_config_file(tmp_path):
    (tmp_path / "pooldev.toml").write_text("[defaults\nseed = ", encoding="utf-8")
    reset_settings_cache()
    with pytest.raises(ConfigError):
        get_setting("seed", 0, int)


def test_debug_log_collects_lines(capsys):
    dbg("sample.line", value=1)
    assert 'sample.line {"value": 1}' in get_log_text()
    _run(capsys, "--verbose", "estimate", "--sigma", "0.2", "--beta", "0.5")
    assert "cli.start" in get_log_text()


def test_version(capsys):
    code, out, _ = _run(capsys, "--version")
    assert code == 0
    assert out.startswith("pooldev ")


@pytest.mark.slow
def test_verify_bound_default_configurations(capsys):
    code, out, _ = _run(capsys, "verify", "bound")
    assert code == 0
    assert len(out.splitlines()) == 13
