from __future__ import annotations
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from numbers import Real
from typing import Optional, Dict, Any, Tuple, Mapping, Literal, Iterator
import math

from pool_core.errors import ConfigError

Weight = Real  # int | float | Fraction
Mode = Literal["partition", "composition"]
MODES: Tuple[str, ...] = ("partition", "composition")

PROB_TOL = 1e-12


# ---------- helpers internos ----------
def is_exact(*values: Any) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def _check_weight(w: Any, what: str) -> None:
    if not isinstance(w, Real) or isinstance(w, bool):
        raise ConfigError(f"{what} must be a real number, got {w!r}")
    if not is_exact(w) and not math.isfinite(float(w)):
        raise ConfigError(f"{what} must be finite, got {w!r}")
    if w < 0:
        raise ConfigError(f"{what} must be nonnegative, got {w!r}")


def close_to(value: Weight, target: Weight, tol: float = PROB_TOL) -> bool:
    if is_exact(value, target):
        return value == target
    return abs(float(value) - float(target)) <= tol


# ---------- medidas sobre {0,1} ----------
@dataclass(frozen=True)
class BinaryMeasure:
    """Pesos no negativos sobre {0,1}: ω, q, μ_n y las frecuencias ℓ de un pool."""
    w0: Weight
    w1: Weight

    def __post_init__(self):
        _check_weight(self.w0, "w0")
        _check_weight(self.w1, "w1")

    @classmethod
    def probability(cls, w0: Weight, w1: Weight) -> "BinaryMeasure":
        m = cls(w0, w1)
        if not close_to(m.total, 1):
            raise ConfigError(f"not a probability measure: w0 + w1 = {m.total}")
        return m

    @classmethod
    def from_prevalence(cls, t: Weight) -> "BinaryMeasure":
        """(1−t, t): la medida de infección con prevalencia t."""
        if t < 0 or t > 1:
            raise ConfigError(f"prevalence must lie in [0,1], got {t}")
        return cls.probability(1 - t, t)

    @property
    def total(self) -> Weight:
        return self.w0 + self.w1

    @property
    def exact(self) -> bool:
        return is_exact(self.w0, self.w1)

    def __getitem__(self, x: int) -> Weight:
        if x == 0:
            return self.w0
        if x == 1:
            return self.w1
        raise KeyError(x)

    def scaled(self, factor: Weight) -> "BinaryMeasure":
        return BinaryMeasure(self.w0 * factor, self.w1 * factor)

    def as_floats(self) -> Tuple[float, float]:
        return float(self.w0), float(self.w1)


# ---------- tipos de pool ----------
@dataclass(frozen=True, order=True)
class PoolType:
    """Pool de tamaño m con c positivos; (m, ℓ) con ℓ = ((m−c)/m, c/m)."""
    m: int
    c: int

    def __post_init__(self):
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "c", int(self.c))
        if self.m < 1:
            raise ConfigError(f"pool size must be >= 1, got {self.m}")
        if not 0 <= self.c <= self.m:
            raise ConfigError(f"positive count must lie in [0, {self.m}], got {self.c}")

    @property
    def a(self) -> int:
        return self.m - self.c

    @property
    def b(self) -> int:
        return self.c

    @property
    def ell(self) -> BinaryMeasure:
        return BinaryMeasure.probability(Fraction(self.m - self.c, self.m), Fraction(self.c, self.m))

    @property
    def negative(self) -> bool:
        return self.c == 0

    @classmethod
    def from_counts(cls, a: int, b: int) -> "PoolType":
        return cls(int(a) + int(b), int(b))


@dataclass(frozen=True)
class PoolLaw:
    """Medida finita sobre PoolType. Átomos ordenados y con peso > 0."""
    atoms: Tuple[Tuple[PoolType, Weight], ...]
    total: Weight

    def __post_init__(self):
        prev = None
        s: Weight = 0
        for pt, w in self.atoms:
            if not isinstance(pt, PoolType):
                raise ConfigError(f"atom key must be a PoolType, got {pt!r}")
            _check_weight(w, f"weight of {pt}")
            if w == 0:
                raise ConfigError(f"zero-weight atom {pt} must be dropped")
            if prev is not None and not prev < pt:
                raise ConfigError("atoms must be strictly sorted")
            prev = pt
            s = s + w
        if not close_to(s, self.total):
            raise ConfigError(f"total {self.total} differs from the sum of weights {s}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[PoolType, Weight], *, probability: bool = False) -> "PoolLaw":
        items = sorted((pt, w) for pt, w in mapping.items() if w != 0)
        total: Weight = sum((w for _, w in items), 0)
        law = cls(tuple(items), total)
        if probability and not close_to(total, 1):
            raise ConfigError(f"not a probability PoolLaw: total = {total}")
        return law

    @classmethod
    def from_counts(cls, counts: Mapping[PoolType, int], k: int) -> "PoolLaw":
        """Ley empírica: cada pool pesa exactamente 1/k."""
        return cls.from_mapping({pt: Fraction(int(c), k) for pt, c in counts.items()}, probability=True)

    @classmethod
    def point_mass(cls, pt: PoolType) -> "PoolLaw":
        return cls(((pt, 1),), 1)

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self) -> Iterator[Tuple[PoolType, Weight]]:
        return iter(self.atoms)

    @property
    def is_probability(self) -> bool:
        return close_to(self.total, 1)

    @property
    def exact(self) -> bool:
        return all(is_exact(w) for _, w in self.atoms)

    def as_dict(self) -> Dict[PoolType, Weight]:
        return dict(self.atoms)

    def canonical_key(self) -> Tuple[Tuple[Tuple[int, int], Weight], ...]:
        return tuple(((pt.m, pt.c), w) for pt, w in self.atoms)


# ---------- simulación ----------
@dataclass(frozen=True)
class SimConfig:
    n: int
    k: int
    q1: Weight
    mode: str = "partition"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "seed", int(self.seed))
        if self.n < 1 or self.k < 1:
            raise ConfigError(f"n and k must be positive, got n={self.n}, k={self.k}")
        if self.k > self.n:
            raise ConfigError(f"k={self.k} exceeds n={self.n}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        _check_weight(self.q1, "q1")
        if float(self.beta_n) * float(self.q1) > 1 + PROB_TOL:
            raise ConfigError(
                f"success probability beta_n*q1 = {float(self.beta_n) * float(self.q1):.6g} exceeds 1"
            )

    @property
    def beta_n(self) -> Fraction:
        return Fraction(self.k, self.n)

    @property
    def mu_n(self) -> float:
        mu = Fraction(self.k, self.n) * Fraction(self.q1)
        return min(1.0, float(mu))

    @property
    def q0(self) -> float:
        return float(1 / self.beta_n) - float(self.q1)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "k": self.k, "q1": float(self.q1), "mode": self.mode, "seed": self.seed}


@dataclass(frozen=True)
class TrialRecord:
    partition: Tuple[int, ...]
    positives_per_pool: Tuple[int, ...]
    I: Fraction
    sigma: Fraction
    P1: BinaryMeasure
    P2: PoolLaw

    @property
    def n(self) -> int:
        return sum(self.partition)

    @property
    def k(self) -> int:
        return len(self.partition)

    @property
    def n_positive(self) -> int:
        return sum(self.positives_per_pool)

    @property
    def n_positive_pools(self) -> int:
        return sum(1 for c in self.positives_per_pool if c >= 1)


# ---------- tasas ----------
@dataclass(frozen=True)
class RateParams:
    """β y q(1); q(0) = 1/β − q(1) se deriva, nunca se configura."""
    beta: Weight
    q1: Weight

    def __post_init__(self):
        _check_weight(self.beta, "beta")
        _check_weight(self.q1, "q1")
        if not 0 < self.beta <= 1:
            raise ConfigError(f"beta must lie in (0,1], got {self.beta}")
        if self.pstar > 1 + PROB_TOL:
            raise ConfigError(f"typical prevalence beta*q1 = {float(self.pstar):.6g} exceeds 1")

    @property
    def q0(self) -> Weight:
        return max(1 / self.beta - self.q1, 0)

    @property
    def q(self) -> BinaryMeasure:
        return BinaryMeasure(self.q0, self.q1)

    @property
    def pstar(self) -> Weight:
        p = self.beta * self.q1
        return min(p, 1)


# ---------- optimización ----------
@dataclass(frozen=True)
class ContractionProblem:
    t: float
    sigma: float
    params: RateParams
    m_max: int = 40
    tol: float = 1e-9
    max_iter: int = 200
    dual_bound: float = 1e3

    def __post_init__(self):
        if not 0 <= self.t <= 1:
            raise ConfigError(f"t must lie in [0,1], got {self.t}")
        if not 0 <= self.sigma <= 1:
            raise ConfigError(f"sigma must lie in [0,1], got {self.sigma}")
        if int(self.m_max) < 2:
            raise ConfigError(f"m_max must be >= 2, got {self.m_max}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")

    @property
    def omega(self) -> BinaryMeasure:
        return BinaryMeasure.from_prevalence(self.t)


@dataclass(frozen=True)
class ContractionSolution:
    value: float                     # min H(π‖Φ) sobre el soporte truncado
    argmin_pi: Optional[PoolLaw]
    duals: Tuple[float, float, float]  # (λ_a, λ_b, λ_neg)
    kkt_residual: float
    feasible: bool
    status: str                      # "optimal" | "infeasible" | "max_iter"
    iterations: int = 0
    joint_value: float = math.inf    # rate_marginal(ω) + β·value
    tail_mass: float = 0.0           # masa de Φ fuera del soporte truncado


# ---------- verificación ----------
@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    finite_n_rate: float
    limit_rate: Optional[float]
    gap: Optional[float]
    method: str                      # "exact" | "enumeration" | "mc"
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    hits: Optional[int] = None
    trials: Optional[int] = None
    annotation: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class DecayEvent:
    """{I ≥ t}, {σ ≥ s} o la caja conjunta {I ≥ t, σ ≥ s}."""
    kind: Literal["I", "sigma", "box"]
    t: Optional[float] = None
    s: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("I", "sigma", "box"):
            raise ConfigError(f"unknown event kind {self.kind!r}")
        if self.kind in ("I", "box") and self.t is None:
            raise ConfigError("event needs a threshold t")
        if self.kind in ("sigma", "box") and self.s is None:
            raise ConfigError("event needs a threshold s")


# ---------- manifest ----------
@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    seed: Optional[int]
    tool_version: str
    timestamp: str
    argv: list = field(default_factory=list)
    version: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
