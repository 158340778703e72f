# pool_core/errors.py
from __future__ import annotations


class PoolDevError(Exception):
    """Base de todos los errores del toolkit."""


class ConfigError(PoolDevError, ValueError):
    """Parámetros fuera de dominio (k > n, β·q1 > 1, σ fuera de [0,1], ...)."""


class UnresolvableEventError(PoolDevError, RuntimeError):
    """El evento es demasiado raro para los trials pedidos."""

    def __init__(self, message: str, *, min_trials: int, p_estimate: float):
        super().__init__(message)
        self.min_trials = int(min_trials)
        self.p_estimate = float(p_estimate)


class SolverError(PoolDevError, RuntimeError):
    """Problema mal formado para el solver (no se usa para no-convergencia)."""
