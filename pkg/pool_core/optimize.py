# pool_core/optimize.py
"""
Ínfimo de contracción: min H(π‖Φ_β^ω) sobre leyes π en el soporte truncado
a + b <= m_max, con ⟨π⟩ = ω/β y masa 1 − σ en los pools sin positivos.

El minimizador es un tilt exponencial
    π(a,b) ∝ Φ(a,b)·exp(λ_a·a + λ_b·b + λ_neg·1{b=0})
y las tres duales se obtienen con Newton amortiguado sobre el dual cóncavo.
Las caras del politopo (t ∈ {0,1}, σ ∈ {0,1}, cota del pool ajustada) se
resuelven quitando átomos y restricciones antes de iterar.
"""
from __future__ import annotations
from typing import Iterable, List, Optional, Tuple
import math

import numpy as np
import pandas as pd
from scipy import special
from scipy.optimize import minimize

from pool_core.errors import SolverError
from pool_core.measures import phi_log_density_grid, phi_support, phi_tail_mass
from pool_core.rates import corollary_rate, rate_marginal, sigma_of_t
from pool_core.schema import ContractionProblem, ContractionSolution, PoolLaw, PoolType, RateParams
from utils.debug_console import dbg, debug_enabled

DEFAULT_M_MAX = 40
ARMIJO = 1e-4
MIN_STEP = 2.0 ** -40
DUAL_RESOLUTION = 1e-14
FACE_TOL = 1e-12

_CONSTRAINTS = ("a", "b", "neg")


# ---------------------------------------------------------------------
# Soporte reducido
# ---------------------------------------------------------------------
class _Support:
    """Átomos activos, features (a, b, 1{b=0}) y objetivo de cada restricción."""

    def __init__(self, prob: ContractionProblem):
        beta = float(prob.params.beta)
        a, b = phi_support(prob.m_max)
        self.beta = beta
        self.all_a, self.all_b = a, b
        self.all_logphi = phi_log_density_grid(beta, prob.omega, a, b)
        self.target = np.array([(1.0 - prob.t) / beta, prob.t / beta, 1.0 - prob.sigma])
        self.mask, self.active, self.reason = self._reduce(prob)
        self.a, self.b = a[self.mask], b[self.mask]
        self.logphi = self.all_logphi[self.mask]
        self.features = np.stack([self.a, self.b, (self.b == 0)], axis=1).astype(float)

    def _reduce(self, prob: ContractionProblem) -> Tuple[np.ndarray, List[int], Optional[str]]:
        a, b = self.all_a, self.all_b
        t, s = float(prob.t), float(prob.sigma)
        A0, B0 = self.target[0], self.target[1]
        mask = np.ones(len(a), dtype=bool)
        active = [0, 1, 2]

        if 1.0 / self.beta > prob.m_max + FACE_TOL:
            return mask, active, "mean pool size 1/beta exceeds m_max"
        if t == 0.0:
            if s > 0.0:
                return mask, active, "t = 0 forces sigma = 0"
            return mask & (b == 0), [0], None
        if t == 1.0:
            if s < 1.0:
                return mask, active, "t = 1 forces sigma = 1"
            return mask & (a == 0), [1], None
        if s == 0.0:
            return mask, active, "sigma = 0 forces t = 0"
        if B0 < s - FACE_TOL:
            return mask, active, "pool bound t >= beta*sigma violated"
        if A0 < (1.0 - s) - FACE_TOL:
            return mask, active, "a-moment (1-t)/beta below its minimum 1 - sigma"
        if s == 1.0:
            mask &= b >= 1
            active.remove(2)
        if abs(B0 - s) <= FACE_TOL:
            # cota del pool ajustada: todo pool positivo tiene exactamente un positivo
            mask &= b <= 1
            active.remove(1)
        if abs(A0 - (1.0 - s)) <= FACE_TOL:
            mask &= ((b == 0) & (a == 1)) | ((b > 0) & (a == 0))
            active.remove(0)
        if not mask.any():
            return mask, active, "no support atom is compatible with the constraints"
        return mask, active, None

    # --- dual ---
    def tilt(self, lam: np.ndarray) -> Tuple[np.ndarray, float]:
        """(log π_λ, log Z(λ)) sobre los átomos activos."""
        logits = self.logphi + self.features @ lam
        log_z = float(special.logsumexp(logits))
        return logits - log_z, log_z

    def dual(self, lam: np.ndarray) -> float:
        _, log_z = self.tilt(lam)
        return float(lam[self.active] @ self.target[self.active]) - log_z


def _residual(pi: np.ndarray, feats: np.ndarray, target: np.ndarray) -> np.ndarray:
    return target - pi @ feats


def _grad_norm(sup: "_Support", lam: np.ndarray, feats: np.ndarray, target: np.ndarray) -> float:
    logpi, _ = sup.tilt(lam)
    return float(np.linalg.norm(_residual(np.exp(logpi), feats, target)))


# ---------------------------------------------------------------------
# Solver dual
# ---------------------------------------------------------------------
def _infeasible(prob: ContractionProblem, reason: str, lam=(0.0, 0.0, 0.0), residual: float = math.inf,
                iterations: int = 0) -> ContractionSolution:
    if debug_enabled():
        dbg("optimize.infeasible", t=prob.t, sigma=prob.sigma, reason=reason, iterations=iterations)
    return ContractionSolution(
        value=math.inf,
        argmin_pi=None,
        duals=tuple(float(x) for x in lam),
        kkt_residual=float(residual),
        feasible=False,
        status="infeasible",
        iterations=iterations,
        joint_value=math.inf,
        tail_mass=phi_tail_mass(float(prob.params.beta), prob.m_max),
    )


def solve_contraction(prob: ContractionProblem) -> ContractionSolution:
    """Newton amortiguado (paso a la mitad con Armijo) sobre el dual cóncavo en (λ_a, λ_b, λ_neg)."""
    sup = _Support(prob)
    if sup.reason is not None:
        return _infeasible(prob, sup.reason)

    act = sup.active
    lam = np.zeros(3)
    feats = sup.features[:, act]
    target = sup.target[act]
    status = "max_iter"
    it = 0
    resid = math.inf
    for it in range(1, int(prob.max_iter) + 1):
        logpi, _ = sup.tilt(lam)
        pi = np.exp(logpi)
        grad = _residual(pi, feats, target)
        resid = float(np.abs(_residual(pi, sup.features, sup.target)).sum())
        if resid <= prob.tol:
            status = "optimal"
            break
        if np.abs(lam).max() > prob.dual_bound:
            return _infeasible(prob, "dual variables diverged", lam, resid, it)
        centered = feats - pi @ feats
        hess = (centered * pi[:, None]).T @ centered
        step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # Newton puede no ser dirección de ascenso si la hessiana es casi singular
        if grad @ step <= 0:
            step = grad
        d_full = np.zeros(3)
        d_full[act] = step
        base = sup.dual(lam)
        slope = float(grad @ step)
        gnorm = float(np.linalg.norm(grad))
        alpha = 1.0
        while alpha >= MIN_STEP:
            trial = lam + alpha * d_full
            if alpha * slope > DUAL_RESOLUTION * (1.0 + abs(base)):
                if sup.dual(trial) >= base + ARMIJO * alpha * slope:
                    break
            # por debajo de la resolución del dual se decide por la norma del gradiente
            elif _grad_norm(sup, trial, feats, target) < gnorm:
                break
            alpha *= 0.5
        else:
            break
        lam = lam + alpha * d_full
        if debug_enabled():
            dbg("optimize.newton.step", it=it, residual=resid, step=alpha, duals=lam.tolist())

    logpi, _ = sup.tilt(lam)
    pi = np.exp(logpi)
    value = max(float(special.rel_entr(pi, np.exp(sup.logphi)).sum()), 0.0)
    # el residuo KKT mira las tres restricciones, también las que la cara eliminó
    full_resid = float(np.abs(_residual(pi, sup.features, sup.target)).sum())
    if status == "optimal" and full_resid > prob.tol:
        status = "max_iter"
    if status != "optimal" and np.abs(lam).max() > prob.dual_bound:
        return _infeasible(prob, "dual variables diverged", lam, full_resid, it)

    law = PoolLaw.from_mapping(
        {PoolType.from_counts(int(ai), int(bi)): float(w) for ai, bi, w in zip(sup.a, sup.b, pi) if w > 0},
    )
    joint = rate_marginal(prob.omega, prob.params) + float(prob.params.beta) * value
    sol = ContractionSolution(
        value=value,
        argmin_pi=law,
        duals=(float(lam[0]), float(lam[1]), float(lam[2])),
        kkt_residual=full_resid,
        feasible=status == "optimal",
        status=status,
        iterations=it,
        joint_value=joint if status == "optimal" else math.inf,
        tail_mass=phi_tail_mass(sup.beta, prob.m_max),
    )
    if debug_enabled():
        dbg("optimize.done", t=prob.t, sigma=prob.sigma, status=status, value=value, residual=full_resid, iterations=it)
    return sol


# ---------------------------------------------------------------------
# Oráculo primal
# ---------------------------------------------------------------------
def primal_oracle(prob: ContractionProblem, *, maxiter: int = 2000) -> Tuple[float, Optional[np.ndarray]]:
    """
    SLSQP directo sobre el símplex truncado completo (sin reducción de caras),
    con las cuatro restricciones de igualdad. Pensado para m_max pequeño.
    Devuelve (valor, π) o (inf, None) si no encuentra un punto factible.
    """
    if prob.m_max > 8:
        raise SolverError(f"primal oracle is meant for small supports, got m_max={prob.m_max}")
    if not 0.0 < prob.t < 1.0:
        raise SolverError("primal oracle needs 0 < t < 1 (Φ vanishes on part of the support otherwise)")
    beta = float(prob.params.beta)
    a, b = phi_support(prob.m_max)
    logphi = phi_log_density_grid(beta, prob.omega, a, b)
    feats = np.stack([np.ones_like(a), a, b, (b == 0)], axis=1).astype(float)
    target = np.array([1.0, (1.0 - prob.t) / beta, prob.t / beta, 1.0 - prob.sigma])

    def fun(x):
        return float(special.xlogy(x, x).sum() - x @ logphi)

    def jac(x):
        return np.log(np.maximum(x, 1e-300)) + 1.0 - logphi

    x0 = np.exp(logphi - special.logsumexp(logphi))
    res = minimize(
        fun, x0, jac=jac, method="SLSQP",
        bounds=[(0.0, 1.0)] * len(x0),
        constraints=[{"type": "eq", "fun": lambda x: x @ feats - target, "jac": lambda x: feats.T}],
        options={"ftol": 1e-15, "maxiter": int(maxiter)},
    )
    x = np.clip(res.x, 0.0, None)
    if np.abs(x @ feats - target).sum() > 1e-7:
        return math.inf, None
    return max(fun(x), 0.0), x


# ---------------------------------------------------------------------
# Perfil φ_σ(t)
# ---------------------------------------------------------------------
PROFILE_COLUMNS = [
    "t", "sigma", "value", "joint_value", "status", "kkt_residual", "corollary_rate", "discrepancy",
]


def phi_sigma_profile(
    t_grid: Iterable[float],
    sigma: Optional[float],
    params: RateParams,
    m_max: int = DEFAULT_M_MAX,
    tol: float = 1e-9,
) -> pd.DataFrame:
    """
    Una fila por t: ínfimo del solver y tasa cerrada del corolario lado a lado.
    Con sigma = None cada fila usa σ = sigma_of_t(t, β); si no, σ fijo.
    """
    beta = float(params.beta)
    rows = []
    for t in t_grid:
        t = float(t)
        s = sigma_of_t(t, beta) if sigma is None else float(sigma)
        sol = solve_contraction(ContractionProblem(t=t, sigma=s, params=params, m_max=m_max, tol=tol))
        cr = corollary_rate(t, params)
        rows.append({
            "t": t,
            "sigma": s,
            "value": sol.value,
            "joint_value": sol.joint_value,
            "status": sol.status,
            "kkt_residual": sol.kkt_residual,
            "corollary_rate": cr,
            "discrepancy": sol.joint_value - cr if sol.feasible else math.inf,
        })
    return pd.DataFrame(rows, columns=PROFILE_COLUMNS)
