# pool_core/rates.py
from __future__ import annotations
from fractions import Fraction
from typing import Literal, Sequence, Tuple
import math

import numpy as np
from scipy import special
from scipy.optimize import minimize_scalar

from pool_core.errors import ConfigError
from pool_core.measures import moment_map, phi_density, rel_entropy_gen, rel_entropy_pool
from pool_core.schema import BinaryMeasure, PoolLaw, RateParams, Weight, is_exact

Variant = Literal["linear", "exact"]
VARIANTS: Tuple[str, ...] = ("linear", "exact")

MOMENT_TOL = 1e-9
# las variables duales del transformado de Legendre se buscan en [−G, G]
LEGENDRE_BOUND = 60.0
LEGENDRE_XATOL = 1e-12


# ---------- helpers internos ----------
def _check_prob(omega: BinaryMeasure) -> BinaryMeasure:
    if not isinstance(omega, BinaryMeasure):
        raise ConfigError(f"expected a BinaryMeasure, got {omega!r}")
    return BinaryMeasure.probability(omega.w0, omega.w1)


def _check_unit(x: float, what: str) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"{what} must lie in [0,1], got {x}")
    return x


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise ConfigError(f"beta must lie in (0,1], got {beta}")
    return beta


def moment_residual(pi: PoolLaw, omega: BinaryMeasure, beta: Weight) -> Weight:
    """‖⟨π⟩ − ω/β‖₁; exacto cuando π, ω y β son racionales."""
    mm = moment_map(pi)
    if pi.exact and omega.exact and is_exact(beta):
        target = omega.scaled(Fraction(1) / beta)
        return abs(mm.w0 - target.w0) + abs(mm.w1 - target.w1)
    b = float(beta)
    return abs(float(mm.w0) - float(omega.w0) / b) + abs(float(mm.w1) - float(omega.w1) / b)


# ---------------------------------------------------------------------
# Tasas
# ---------------------------------------------------------------------
def rate_marginal(omega: BinaryMeasure, p: RateParams) -> float:
    """β·H(ω/β‖q); sobre el símplex es la KL binaria entre ω y (1−p*, p*)."""
    omega = _check_prob(omega)
    beta = float(p.beta)
    w0, w1 = omega.as_floats()
    return beta * rel_entropy_gen(BinaryMeasure(w0 / beta, w1 / beta), BinaryMeasure(float(p.q0), float(p.q1)))


def rate_conditional(pi: PoolLaw, omega: BinaryMeasure, p: RateParams, tol: float = MOMENT_TOL) -> float:
    """H(π‖Φ_β^ω) si ⟨π⟩ = ω/β (con tolerancia L1 `tol`), +inf si no."""
    omega = _check_prob(omega)
    if not pi.is_probability:
        raise ConfigError(f"pi must be a probability PoolLaw, total = {pi.total}")
    resid = moment_residual(pi, omega, p.beta)
    if resid > tol:
        return math.inf
    beta = float(p.beta)
    return rel_entropy_pool(pi, lambda pt: phi_density(beta, omega, pt))


def rate_joint(omega: BinaryMeasure, pi: PoolLaw, p: RateParams, tol: float = MOMENT_TOL) -> float:
    """β·J_β(ω, π) = β·[H(ω/β‖q) + H(π‖Φ_β^ω)] bajo la restricción, +inf fuera."""
    cond = rate_conditional(pi, omega, p, tol)
    if math.isinf(cond):
        return math.inf
    return rate_marginal(omega, p) + float(p.beta) * cond


# ---------------------------------------------------------------------
# Estimador del corolario
# ---------------------------------------------------------------------
def t_of_sigma(sigma: float, beta: float) -> float:
    """t = −β log[1 − (1 − e^{−1/β}) σ]: prevalencia estimada a partir de la fracción de pools positivos."""
    sigma = _check_unit(sigma, "sigma")
    beta = _check_beta(beta)
    if sigma == 1.0:
        return 1.0
    t = -beta * math.log1p(math.expm1(-1.0 / beta) * sigma)
    return min(max(t, 0.0), 1.0)


def sigma_of_t(t: float, beta: float) -> float:
    """Inversa: σ = (1 − e^{−t/β}) / (1 − e^{−1/β})."""
    t = _check_unit(t, "t")
    beta = _check_beta(beta)
    if t == 1.0:
        return 1.0
    return min(max(math.expm1(-t / beta) / math.expm1(-1.0 / beta), 0.0), 1.0)


def pool_bound(sigma: float, beta: float) -> float:
    """Cota casi segura I >= β·σ (cada pool positivo tiene al menos un positivo)."""
    return _check_beta(beta) * _check_unit(sigma, "sigma")


def prevalence_regime(sigma: float) -> str:
    """σ = 0: ningún infectado; σ = 1: todos; en otro caso, algunos."""
    sigma = _check_unit(sigma, "sigma")
    if sigma == 0.0:
        return "none"
    if sigma == 1.0:
        return "all"
    return "some"


def corollary_rate(t: float, p: RateParams) -> float:
    """(1−t) log((1−t)/(1−p*)) + t log(t/p*), con 0·log 0 = 0."""
    t = _check_unit(t, "t")
    ps = float(p.pstar)
    return float(special.rel_entr(t, ps) + special.rel_entr(1.0 - t, 1.0 - ps))


# ---------------------------------------------------------------------
# CGF escalada y transformada de Legendre
# ---------------------------------------------------------------------
def scaled_cgf(g: Sequence[float], p: RateParams, variant: Variant = "exact") -> float:
    """
    linear: −⟨1 − e^g, βq⟩;
    exact: log((1−p*) e^{g(0)} + p* e^{g(1)}), la CGF de una Bernoulli(p*).
    """
    g0, g1 = (float(v) for v in g)
    ps = float(p.pstar)
    if variant == "linear":
        return float(np.expm1(g0) * (1.0 - ps) + np.expm1(g1) * ps)
    if variant == "exact":
        return float(special.logsumexp([g0, g1], b=[1.0 - ps, ps]))
    raise ConfigError(f"unknown CGF variant {variant!r}")


def _maximize(fun, bound: float = LEGENDRE_BOUND) -> float:
    res = minimize_scalar(lambda x: -fun(x), bounds=(-bound, bound), method="bounded",
                          options={"xatol": LEGENDRE_XATOL, "maxiter": 2000})
    return float(-res.fun)


def legendre(omega: BinaryMeasure, p: RateParams, variant: Variant = "exact") -> float:
    """sup_g {⟨g, ω⟩ − Λ(g)} numérico; el suprando es cóncavo en g."""
    omega = _check_prob(omega)
    w0, w1 = omega.as_floats()
    ps = float(p.pstar)
    # sin masa de referencia donde ω pone masa, el supremo es +inf
    if (w1 > 0 and ps == 0.0) or (w0 > 0 and ps == 1.0):
        return math.inf
    if variant == "linear":
        # separable: sup_g [g ω(x) − (e^g − 1) βq(x)] en cada coordenada
        total = 0.0
        for wx, bqx in ((w0, 1.0 - ps), (w1, ps)):
            if bqx == 0.0:
                continue
            total += _maximize(lambda g, wx=wx, bqx=bqx: g * wx - math.expm1(g) * bqx)
        return max(total, 0.0)
    if variant == "exact":
        # Λ(g + c) = Λ(g) + c y ω suma 1: basta d = g(1) − g(0)
        if ps in (0.0, 1.0):
            return 0.0
        return max(_maximize(lambda d: d * w1 - special.logsumexp([0.0, d], b=[1.0 - ps, ps])), 0.0)
    raise ConfigError(f"unknown CGF variant {variant!r}")
