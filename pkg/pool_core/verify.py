# pool_core/verify.py
"""
Oráculos independientes y estudios de convergencia:
- tasa exacta binomial (log-gamma) contra la tasa límite,
- enumeración exhaustiva de la ley conjunta para n <= 10,
- distancia en variación total entre Monte Carlo y enumeración,
- informe de las cotas tipo sándwich (se omiten los términos o(1)),
- tasas de decaimiento Monte Carlo con intervalos de Wilson.
"""
from __future__ import annotations
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple
import math

import numpy as np
import pandas as pd
from scipy import special, stats

from pool_core.errors import ConfigError, UnresolvableEventError
from pool_core.measures import phi_density, rel_entropy_pool
from pool_core.partitions import count_compositions, count_partitions, enumerate_compositions, enumerate_partitions
from pool_core.rates import corollary_rate, sigma_of_t, t_of_sigma
from pool_core.schema import BinaryMeasure, ConvergenceRow, DecayEvent, PoolLaw, PoolType, RateParams, SimConfig
from pool_core.simulate import block_rng, run_batch, simulate_tally
from utils.debug_console import dbg, debug_enabled

ENUM_MAX_N = 10
MIN_HITS = 10
CONFIDENCE = 0.95
TV_MIN_TRIALS = 100_000
BINOMIAL_BLOCK = 1 << 20
TYPICAL_Z = 3.0

CONVERGENCE_COLUMNS = [
    "n", "finite_n_rate", "limit_rate", "gap", "method", "ci_low", "ci_high", "hits", "trials", "annotation",
]

CanonicalP2 = Tuple[Tuple[Tuple[int, int], Fraction], ...]


# ---------------------------------------------------------------------
# Binomial exacta
# ---------------------------------------------------------------------
def _log_binom_pmf(n: int, j: int, mu: float) -> float:
    return float(
        special.gammaln(n + 1) - special.gammaln(j + 1) - special.gammaln(n - j + 1)
        + special.xlogy(j, mu) + special.xlog1py(n - j, -mu)
    )


def exact_binomial_rate(n: int, t: float, p: RateParams) -> ConvergenceRow:
    """−(1/n) log P(Bin(n, p*) = round(n·t)) frente a corollary_rate(t)."""
    n = int(n)
    if n < 1:
        raise ConfigError(f"n must be positive, got {n}")
    if not 0.0 <= float(t) <= 1.0:
        raise ConfigError(f"t must lie in [0,1], got {t}")
    j = int(round(n * float(t)))
    logp = _log_binom_pmf(n, j, float(p.pstar))
    finite = -logp / n
    limit = corollary_rate(t, p)
    return ConvergenceRow(n=n, finite_n_rate=finite, limit_rate=limit, gap=finite - limit, method="exact")


def binomial_convergence(ns: Sequence[int], t: float, p: RateParams) -> Tuple[pd.DataFrame, float, bool]:
    """
    Filas exact_binomial_rate por n, la constante ajustada C = max gap·n/log n
    y si |gap| decrece estrictamente en la grilla.
    """
    rows = [exact_binomial_rate(n, t, p) for n in sorted(int(v) for v in ns)]
    df = pd.DataFrame([r.to_dict() for r in rows], columns=CONVERGENCE_COLUMNS)
    gaps = np.abs(df["gap"].to_numpy(dtype=float))
    ns_arr = df["n"].to_numpy(dtype=float)
    fitted = float(np.max(gaps * ns_arr / np.log(np.maximum(ns_arr, 2.0)))) if len(df) else 0.0
    decreasing = bool(np.all(np.diff(gaps) < 0))
    return df, fitted, decreasing


# ---------------------------------------------------------------------
# Enumeración exacta (n <= 10)
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class JointLaw:
    n: int
    k: int
    mu: float
    mode: str
    table: np.ndarray                                   # (n+1) x (k+1): P(positivos, pools positivos)
    types: Optional[Dict[Tuple[int, CanonicalP2], float]] = None  # (positivos, P2 canónica) -> prob

    @property
    def total(self) -> float:
        return float(self.table.sum())

    def marginal_positive(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def as_frame(self) -> pd.DataFrame:
        i, j = np.nonzero(self.table)
        return pd.DataFrame({
            "n_positive": i,
            "n_positive_pools": j,
            "I": i / self.n,
            "sigma": j / self.k,
            "probability": self.table[i, j],
        })


def _outcome_bits(n: int) -> np.ndarray:
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(np.int64)


def _canonical_p2(sizes: Sequence[int], per_pool: Sequence[int], k: int) -> CanonicalP2:
    counts = Counter(zip((int(m) for m in sizes), (int(c) for c in per_pool)))
    return tuple(sorted((mc, Fraction(cnt, k)) for mc, cnt in counts.items()))


def enumerate_joint_law(n: int, k: int, q1, mode: str = "partition", *, types: bool = False) -> JointLaw:
    """Ley exacta de (positivos, pools positivos) y, si `types`, de (P1, P2) canónicas."""
    n, k = int(n), int(k)
    if n > ENUM_MAX_N:
        raise ConfigError(f"enumeration refuses n={n} > {ENUM_MAX_N}")
    cfg = SimConfig(n=n, k=k, q1=q1, mode=mode)
    mu = cfg.mu_n
    if mode == "partition":
        layouts = enumerate_partitions(n, k)
        count = count_partitions(n, k)
    else:
        layouts = enumerate_compositions(n, k)
        count = count_compositions(n, k)

    bits = _outcome_bits(n)
    n1 = bits.sum(axis=1)
    weights = np.power(mu, n1) * np.power(1.0 - mu, n - n1)
    cs = np.zeros((len(bits), n + 1), dtype=np.int64)
    np.cumsum(bits, axis=1, out=cs[:, 1:])

    acc = np.zeros((n + 1, k + 1))
    type_acc: Dict[Tuple[int, CanonicalP2], float] = {}
    for sizes in layouts:
        s = np.asarray(sizes, dtype=np.int64)
        ends = np.cumsum(s)
        per_pool = cs[:, ends] - cs[:, ends - s]
        npools = (per_pool > 0).sum(axis=1)
        np.add.at(acc, (n1, npools), weights)
        if types:
            for row, w, j in zip(per_pool, weights, n1):
                if w == 0:
                    continue
                key = (int(j), _canonical_p2(s, row, k))
                type_acc[key] = type_acc.get(key, 0.0) + float(w)
    # se divide al final para que un punto de masa sume exactamente 1
    table = acc / count
    law = JointLaw(
        n=n, k=k, mu=mu, mode=mode, table=table,
        types={key: v / count for key, v in type_acc.items()} if types else None,
    )
    if debug_enabled():
        dbg("verify.enumerate.done", n=n, k=k, mode=mode, layouts=len(layouts), total=law.total)
    return law


def mc_vs_enumeration(
    n: int, k: int, q1, trials: int, mode: str = "partition", seed: int = 0, workers: int = 1,
) -> float:
    """Variación total entre la ley Monte Carlo de (I, σ) y la enumerada."""
    exact = enumerate_joint_law(n, k, q1, mode)
    cfg = SimConfig(n=n, k=k, q1=q1, mode=mode, seed=seed)
    tally = simulate_tally(cfg, trials, workers)
    tv = 0.5 * float(np.abs(tally / int(trials) - exact.table).sum())
    if debug_enabled():
        dbg("verify.tv", n=n, k=k, mode=mode, trials=trials, tv=tv)
    return tv


# ---------------------------------------------------------------------
# Informe sándwich
# ---------------------------------------------------------------------
SANDWICH_COLUMNS = [
    "n", "k", "n_positive", "p2", "exact", "central", "lower", "upper", "log_ratio", "inside", "within_factor",
]
SANDWICH_NOTE = "bounds drop the o(1) terms of eta1 and eta2; rows are flagged, never failed"


def _conditional_law(n: int, k: int, mode: str) -> JointLaw:
    # la ley de P2 dado P1 no depende de μ: se enumera con μ = 1/2
    return enumerate_joint_law(n, k, Fraction(n, 2 * k), mode, types=True)


def sandwich_report(
    n: int, k: int, omega_n: BinaryMeasure, pi_n: PoolLaw, mode: str = "partition", *, law: Optional[JointLaw] = None,
) -> Dict[str, object]:
    """
    P{P2 = π_n | P1 = ω_n} exacta frente a e^{−nβ_n H(π_n‖Φ)} y las cotas
    e^{−nβ_n H + nη1} <= P <= e^{−nβ_n H + nη2}, con
    η1 = −Σ 1/(12 n β_n π_n(x)) y η2 = Σ 1/(n ω_n(x)).
    """
    n, k = int(n), int(k)
    law = law if law is not None else _conditional_law(n, k, mode)
    if law.types is None or (law.n, law.k) != (n, k):
        raise ConfigError("law must be an enumeration with types for the same (n, k)")
    omega_n = BinaryMeasure.probability(omega_n.w0, omega_n.w1)
    n1 = Fraction(omega_n.w1) * n
    if n1.denominator != 1:
        raise ConfigError(f"omega_n(1) = {omega_n.w1} is not a multiple of 1/{n}")
    j = int(n1)
    key = (j, pi_n.canonical_key())
    joint = law.types.get(key, 0.0)
    p_omega = float(law.marginal_positive()[j])
    if joint <= 0.0 or p_omega <= 0.0:
        raise ConfigError(f"(omega_n, pi_n) is not attainable at n={n}, k={k}")
    exact = joint / p_omega

    beta_n = Fraction(k, n)
    h = rel_entropy_pool(pi_n, lambda pt: phi_density(beta_n, omega_n, pt))
    central = math.exp(-n * float(beta_n) * h)
    n_eta1 = -sum(1.0 / (12.0 * float(beta_n) * float(w)) for _, w in pi_n.atoms)
    n_eta2 = sum(1.0 / float(w) for w in (omega_n.w0, omega_n.w1) if w > 0)
    lower = central * math.exp(n_eta1)
    upper = central * math.exp(n_eta2)
    log_ratio = math.log(exact) - math.log(central) if central > 0 else math.inf
    return {
        "n": n,
        "k": k,
        "n_positive": j,
        "p2": ";".join(f"{m}:{c}:{w}" for (m, c), w in key[1]),
        "exact": exact,
        "central": central,
        "lower": lower,
        "upper": upper,
        "log_ratio": log_ratio,
        "inside": bool(lower <= exact <= upper),
        "within_factor": bool(abs(log_ratio) <= abs(n_eta1) + abs(n_eta2)),
    }


def sandwich_table(n: int, k: int, mode: str = "partition") -> pd.DataFrame:
    """sandwich_report para cada (ω_n, π_n) alcanzable."""
    law = _conditional_law(n, k, mode)
    rows = []
    for (j, p2), _ in sorted(law.types.items()):
        omega = BinaryMeasure.probability(Fraction(n - j, n), Fraction(j, n))
        pi = PoolLaw.from_mapping({PoolType(*mc): w for mc, w in p2}, probability=True)
        rows.append(sandwich_report(n, k, omega, pi, mode, law=law))
    return pd.DataFrame(rows, columns=SANDWICH_COLUMNS)


# ---------------------------------------------------------------------
# Tasas de decaimiento Monte Carlo
# ---------------------------------------------------------------------
def _count_threshold(n: int, x: float) -> int:
    """⌈n·x⌉ con tolerancia para que n·x entero no salte al siguiente."""
    return max(0, math.ceil(n * float(x) - 1e-9))


def _wilson(hits: int, trials: int) -> Tuple[float, float]:
    ci = stats.binomtest(int(hits), int(trials)).proportion_ci(confidence_level=CONFIDENCE, method="wilson")
    return float(ci.low), float(ci.high)


def _positive_count_hits(cfg: SimConfig, threshold: int, trials: int) -> int:
    """Trials con al menos `threshold` positivos; el conteo es Bin(n, μ_n) sea cual sea el pooling."""
    hits, done, index = 0, 0, 0
    while done < trials:
        size = min(BINOMIAL_BLOCK, trials - done)
        draws = block_rng(cfg.seed, index).binomial(cfg.n, cfg.mu_n, size=size)
        hits += int((draws >= threshold).sum())
        done += size
        index += 1
    return hits


def _upper_rate(t: float, p: RateParams) -> float:
    """Tasa de {I >= t}: la del corolario si t supera p*, 0 si no."""
    return corollary_rate(t, p) if t > float(p.pstar) else 0.0


def mc_decay_rate(
    event: DecayEvent,
    ns: Sequence[int],
    beta: float,
    q1: float,
    trials: int,
    mode: str = "partition",
    seed: int = 0,
    workers: int = 1,
) -> List[ConvergenceRow]:
    """
    −(1/n) log P(evento) por n, con intervalo de Wilson transportado por −(1/n) log.
    k = round(β·n). Eventos con menos de MIN_HITS aciertos se rechazan.
    """
    trials = int(trials)
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    params = RateParams(beta, q1)
    rows: List[ConvergenceRow] = []
    for n in ns:
        n = int(n)
        k = max(1, int(round(float(beta) * n)))
        cfg = SimConfig(n=n, k=k, q1=q1, mode=mode, seed=seed)
        limit: Optional[float] = None
        annotation: Optional[float] = None
        if event.kind == "I":
            j0 = _count_threshold(n, event.t)
            hits = _positive_count_hits(cfg, j0, trials)
            limit = _upper_rate(float(event.t), params)
            # cola binomial exacta a n finito
            annotation = float(-stats.binom.logsf(j0 - 1, n, cfg.mu_n) / n)
            p_guess = float(stats.binom.sf(j0 - 1, n, cfg.mu_n))
        else:
            tally = simulate_tally(cfg, trials, workers)
            j_s = _count_threshold(k, event.s)
            if event.kind == "sigma":
                hits = int(tally[:, j_s:].sum())
                t_cand = t_of_sigma(float(event.s), float(beta))
            else:
                j_t = _count_threshold(n, event.t)
                hits = int(tally[j_t:, j_s:].sum())
                t_cand = max(float(event.t), t_of_sigma(float(event.s), float(beta)))
            annotation = _upper_rate(t_cand, params)
            p_guess = max(hits, 1) / trials
        if debug_enabled():
            dbg("verify.mc.block", kind=event.kind, n=n, k=k, hits=hits, trials=trials)
        if hits < MIN_HITS:
            need = math.ceil(MIN_HITS / p_guess) if p_guess > 0 else math.inf
            raise UnresolvableEventError(
                f"event {event.kind} at n={n} had {hits} hits in {trials} trials; "
                f"about {need} trials are needed",
                min_trials=need if math.isfinite(need) else 2**63 - 1,
                p_estimate=p_guess,
            )
        p_hat = hits / trials
        lo, hi = _wilson(hits, trials)
        finite = -math.log(p_hat) / n
        rows.append(ConvergenceRow(
            n=n,
            finite_n_rate=finite,
            limit_rate=limit,
            gap=finite - limit if limit is not None else None,
            method="mc",
            ci_low=-math.log(hi) / n,
            ci_high=-math.log(lo) / n,
            hits=hits,
            trials=trials,
            annotation=annotation,
        ))
    return rows


# ---------------------------------------------------------------------
# Punto típico y cota casi segura
# ---------------------------------------------------------------------
def _z_score(diff: float, se: float) -> float:
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def typical_point_report(cfg: SimConfig, trials: int = 100, workers: int = 1) -> Dict[str, object]:
    """
    Media de t(σ) por trial frente a la media de I, con la discrepancia
    d = t(σ) − I estandarizada; pass si |z| <= 3. Aparte, σ medio frente a
    sigma_of_t(I medio) con su propio z y estado.
    """
    batch = run_batch(cfg, trials, workers)
    df = batch.summaries
    beta = float(cfg.beta_n)
    I = df["n_positive"].to_numpy(dtype=float) / cfg.n
    sigma = df["n_positive_pools"].to_numpy(dtype=float) / cfg.k
    t_hat = np.array([t_of_sigma(s, beta) for s in sigma])
    d = t_hat - I
    T = len(d)

    def _mean_ci(x: np.ndarray) -> Tuple[float, float, float]:
        m = float(x.mean())
        if T < 2 or float(x.std(ddof=1)) == 0.0:
            return m, m, m
        lo, hi = stats.t.interval(CONFIDENCE, T - 1, loc=m, scale=stats.sem(x))
        return m, float(lo), float(hi)

    mean_I, I_lo, I_hi = _mean_ci(I)
    mean_t, t_lo, t_hi = _mean_ci(t_hat)
    mean_d = float(d.mean())
    se_d = float(stats.sem(d)) if T >= 2 else 0.0
    z = _z_score(mean_d, se_d)
    # σ medio frente a la curva típica evaluada en la I media
    mean_s = float(sigma.mean())
    sigma_pred = sigma_of_t(min(max(mean_I, 0.0), 1.0), beta)
    se_s = float(stats.sem(sigma)) if T >= 2 else 0.0
    z_sigma = _z_score(mean_s - sigma_pred, se_s)
    report = {
        **cfg.to_dict(),
        "trials": T,
        "pstar": beta * float(cfg.q1),
        "mean_I": mean_I, "I_ci_low": I_lo, "I_ci_high": I_hi,
        "mean_t_hat": mean_t, "t_hat_ci_low": t_lo, "t_hat_ci_high": t_hi,
        "mean_sigma": mean_s,
        "sigma_pred": sigma_pred,
        "sigma_se": se_s,
        "z_sigma": z_sigma,
        "sigma_status": "pass" if abs(z_sigma) <= TYPICAL_Z else "flag",
        "mean_discrepancy": mean_d,
        "discrepancy_se": se_d,
        "z": z,
        "status": "pass" if abs(z) <= TYPICAL_Z else "flag",
    }
    if debug_enabled():
        dbg("verify.typical.done", z=z, status=report["status"], z_sigma=z_sigma)
    return report


BOUND_COLUMNS = ["n", "k", "q1", "mode", "seed", "trials", "violations", "min_slack"]


def bound_audit(configs: Sequence[SimConfig], trials: int, workers: int = 1) -> pd.DataFrame:
    """Trials con n·I < k·σ (positivos < pools positivos) por configuración; debería ser 0 siempre."""
    rows = []
    for cfg in configs:
        tally = simulate_tally(cfg, trials, workers)
        i, j = np.nonzero(tally)
        slack = i - j
        rows.append({
            **cfg.to_dict(),
            "trials": int(trials),
            "violations": int(tally[i[slack < 0], j[slack < 0]].sum()),
            "min_slack": int(slack.min()),
        })
    return pd.DataFrame(rows, columns=BOUND_COLUMNS)
