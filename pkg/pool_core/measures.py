# pool_core/measures.py
from __future__ import annotations
from typing import Callable, NamedTuple, Tuple
import math

import numpy as np
from scipy import special, stats

from pool_core.errors import ConfigError
from pool_core.schema import BinaryMeasure, PoolLaw, PoolType, Weight

# Las sumas infinitas sobre Φ se cortan en a + b <= M_max
PHI_SUM_M_MAX = 60


class TruncatedSum(NamedTuple):
    value: float
    tail_mass: float  # masa de Φ con a + b > M_max (exacta, vía la cola de Pois(1/β))


class TruncatedPhi(NamedTuple):
    law: PoolLaw
    tail_mass: float


# ---------- helpers internos ----------
def _check_beta(beta: Weight) -> float:
    b = float(beta)
    if not 0 < b <= 1:
        raise ConfigError(f"beta must lie in (0,1], got {beta}")
    return b


def _check_omega(omega: BinaryMeasure) -> BinaryMeasure:
    if not isinstance(omega, BinaryMeasure):
        raise ConfigError(f"omega must be a BinaryMeasure, got {omega!r}")
    return BinaryMeasure.probability(omega.w0, omega.w1)


def log_normalizer(beta: float) -> float:
    """−log(1 − e^{−1/β}); el átomo (0,0) excluido pesa e^{−1/β}."""
    return -math.log(-math.expm1(-1.0 / beta))


def _poisson_logpmf(j, lam: float):
    # xlogy deja 0·log 0 = 0, así que λ = 0 funciona sin casos especiales
    j = np.asarray(j, dtype=float)
    return special.xlogy(j, lam) - lam - special.gammaln(j + 1.0)


def phi_support(m_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Todos los (a, b) con 1 <= a + b <= m_max, en el orden de PoolType (m, c)."""
    m_max = int(m_max)
    if m_max < 1:
        raise ConfigError(f"m_max must be >= 1, got {m_max}")
    m = np.repeat(np.arange(1, m_max + 1), np.arange(2, m_max + 2))
    c = np.concatenate([np.arange(0, mm + 1) for mm in range(1, m_max + 1)])
    return m - c, c


def phi_log_density_grid(beta: float, omega: BinaryMeasure, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    beta = _check_beta(beta)
    w0, w1 = _check_omega(omega).as_floats()
    return _poisson_logpmf(a, w0 / beta) + _poisson_logpmf(b, w1 / beta) + log_normalizer(beta)


def phi_tail_mass(beta: float, m_max: int) -> float:
    beta = _check_beta(beta)
    return float(stats.poisson.sf(int(m_max), 1.0 / beta) * math.exp(log_normalizer(beta)))


# ---------- entropías ----------
def rel_entropy_gen(mu: BinaryMeasure, nu: BinaryMeasure) -> float:
    """Entropía relativa generalizada Σ [μ log(μ/ν) − μ + ν]; +inf si μ no es a.c. respecto de ν."""
    if not isinstance(mu, BinaryMeasure) or not isinstance(nu, BinaryMeasure):
        raise ConfigError("rel_entropy_gen expects two BinaryMeasure values")
    x = np.array(mu.as_floats())
    y = np.array(nu.as_floats())
    return float(special.kl_div(x, y).sum())


def rel_entropy_pool(pi: PoolLaw, ref_density: Callable[[PoolType], float]) -> float:
    """H(π‖ref) = Σ π log(π/ref) sobre los átomos de π."""
    if not pi.is_probability:
        raise ConfigError(f"rel_entropy_pool needs a probability PoolLaw, total = {pi.total}")
    w = np.array([float(v) for _, v in pi.atoms])
    ref = np.array([float(ref_density(pt)) for pt, _ in pi.atoms])
    if np.any(ref < 0):
        raise ConfigError("reference density must be nonnegative")
    return float(special.rel_entr(w, ref).sum())


# ---------- Φ_β^ω ----------
def phi_density(beta: Weight, omega: BinaryMeasure, pt: PoolType) -> float:
    """Φ_β^ω(m, ℓ): producto de Poisson(ω(0)/β) y Poisson(ω(1)/β) sin el átomo vacío."""
    logp = phi_log_density_grid(float(beta), omega, np.array([pt.a]), np.array([pt.b]))[0]
    return float(np.exp(logp))


def phi_law(beta: Weight, omega: BinaryMeasure, m_max: int = PHI_SUM_M_MAX, *, renormalize: bool = False) -> TruncatedPhi:
    """Φ truncada a a + b <= m_max como PoolLaw, junto con la masa excluida."""
    a, b = phi_support(m_max)
    dens = np.exp(phi_log_density_grid(float(beta), omega, a, b))
    if renormalize:
        dens = dens / dens.sum()
    law = PoolLaw.from_mapping(
        {PoolType.from_counts(ai, bi): float(d) for ai, bi, d in zip(a, b, dens) if d > 0},
        probability=renormalize,
    )
    return TruncatedPhi(law, phi_tail_mass(float(beta), m_max))


def phi_mass(beta: Weight, omega: BinaryMeasure, m_max: int = PHI_SUM_M_MAX) -> TruncatedSum:
    a, b = phi_support(m_max)
    dens = np.exp(phi_log_density_grid(float(beta), omega, a, b))
    return TruncatedSum(float(dens.sum()), phi_tail_mass(float(beta), m_max))


def moment_map(pi: PoolLaw) -> BinaryMeasure:
    """⟨π⟩ = (Σ (m−c)·π(m,c), Σ c·π(m,c)); exacto si los pesos son racionales."""
    w0: Weight = 0
    w1: Weight = 0
    for pt, w in pi.atoms:
        w0 = w0 + pt.a * w
        w1 = w1 + pt.b * w
    return BinaryMeasure(w0, w1)


def pool_negative_mass(beta: Weight, omega: BinaryMeasure) -> float:
    """Masa de Φ en los pools sin positivos: e^{−ω(1)/β}(1−e^{−(1−ω(1))/β})/(1−e^{−1/β})."""
    beta = _check_beta(beta)
    w1 = float(_check_omega(omega).w1)
    num = math.exp(-w1 / beta) * -math.expm1(-(1.0 - w1) / beta)
    return num / -math.expm1(-1.0 / beta)


def pool_negative_mass_summed(beta: Weight, omega: BinaryMeasure, m_max: int = PHI_SUM_M_MAX) -> TruncatedSum:
    beta = _check_beta(beta)
    a = np.arange(1, int(m_max) + 1)
    dens = np.exp(phi_log_density_grid(beta, omega, a, np.zeros_like(a)))
    return TruncatedSum(float(dens.sum()), phi_tail_mass(beta, m_max))


def phi_moment_gap(beta: Weight, omega: BinaryMeasure, m_max: int = PHI_SUM_M_MAX) -> dict:
    """
    Compara ⟨Φ⟩ (sumado y en forma cerrada (ω/β)/(1−e^{−1/β})) con la restricción ω/β.
    Φ no cumple ⟨Φ⟩ = ω/β; aquí se mide la diferencia en vez de suponerla nula.
    """
    beta_f = _check_beta(beta)
    omega = _check_omega(omega)
    a, b = phi_support(m_max)
    dens = np.exp(phi_log_density_grid(beta_f, omega, a, b))
    summed = BinaryMeasure(float((a * dens).sum()), float((b * dens).sum()))
    scale = math.exp(log_normalizer(beta_f))
    w0, w1 = omega.as_floats()
    closed = BinaryMeasure(w0 / beta_f * scale, w1 / beta_f * scale)
    target = BinaryMeasure(w0 / beta_f, w1 / beta_f)
    return {
        "summed": summed,
        "closed_form": closed,
        "target": target,
        "gap_l1": abs(closed.w0 - target.w0) + abs(closed.w1 - target.w1),
        "summation_error_l1": abs(summed.w0 - closed.w0) + abs(summed.w1 - closed.w1),
        "tail_mass": phi_tail_mass(beta_f, m_max),
    }
