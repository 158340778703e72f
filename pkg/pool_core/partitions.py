# pool_core/partitions.py
"""
Particiones de n en exactamente k partes positivas: conteo exacto (enteros de
precisión arbitraria), enumeración, muestreo uniforme y composiciones.

El muestreo por defecto desordena (unrank) un entero uniforme en [0, p(n,k))
contra la recurrencia p(n,k) = p(n−1,k−1) + p(n−k,k). La rama "la parte más
pequeña es 1" va primero; ese orden fija el rango de cada partición.
Cuando la tabla de conteos sería demasiado grande (n ~ 10^5) se usa un
muestreador de Boltzmann con rechazo, que también es exactamente uniforme.
"""
from __future__ import annotations
from functools import lru_cache
from itertools import combinations
from typing import Iterator, List, Tuple
import math
import threading

import numpy as np
from scipy.optimize import brentq

from pool_core.errors import ConfigError
from utils.debug_console import dbg, debug_enabled

Partition = Tuple[int, ...]

PARTITION_ENUM_MAX_N = 40
TABLE_MAX_ENTRIES = 4_000_000      # tope de la tabla de conteos (n_max+1)*(k_max+1)
UNRANK_MAX_ENTRIES = 250_000       # por encima, muestreo de Boltzmann
BLOCK_TABLE_MAX = 20_000           # particiones precalculadas para muestreo por bloques
BOLTZMANN_MAX_ATTEMPTS = 1_000_000


# ---------------------------------------------------------------------
# Conteo
# ---------------------------------------------------------------------
class PartitionCountTable:
    """Tabla memoizada p(n,k), se amplía bajo demanda y está protegida por un lock."""

    def __init__(self, max_entries: int = TABLE_MAX_ENTRIES):
        self.max_entries = int(max_entries)
        self._lock = threading.Lock()
        self._rows: List[List[int]] = [[1]]   # _rows[k][n]; p(0,0) = 1
        self._n_max = 0

    @property
    def shape(self) -> Tuple[int, int]:
        return self._n_max + 1, len(self._rows)

    def count(self, n: int, k: int) -> int:
        if n < 0 or k < 0:
            return 0
        if k == 0 or n == 0:
            return 1 if n == 0 and k == 0 else 0
        if k > n:
            return 0
        if k == 1 or k == n:
            return 1
        covered = n <= self._n_max and k < len(self._rows)
        if not covered and (max(n, self._n_max) + 1) * (max(k, len(self._rows) - 1) + 1) > self.max_entries:
            # fuera del tope: se cuenta sin memoizar
            return _count_direct(n, k)
        self._ensure(n, k)
        return self._rows[k][n]

    def _ensure(self, n: int, k: int) -> None:
        with self._lock:
            if n <= self._n_max and k < len(self._rows):
                return
            new_n = max(n, self._n_max)
            new_k = max(k, len(self._rows) - 1)
            rows = [[0] * (new_n + 1) for _ in range(new_k + 1)]
            rows[0][0] = 1
            for kk in range(1, new_k + 1):
                prev, cur = rows[kk - 1], rows[kk]
                for nn in range(kk, new_n + 1):
                    cur[nn] = prev[nn - 1] + cur[nn - kk]
            self._rows = rows
            self._n_max = new_n
            if debug_enabled():
                dbg("partitions.table.grow", n_max=new_n, k_max=new_k)


def _count_direct(n: int, k: int) -> int:
    """p(n,k) como particiones de n − k en partes <= k, con una sola fila."""
    m = n - k
    ways = [1] + [0] * m
    for part in range(1, min(k, m) + 1):
        for x in range(part, m + 1):
            ways[x] += ways[x - part]
    return ways[m]


_TABLE = PartitionCountTable()


def count_partitions(n: int, k: int) -> int:
    """p(n,k): número de particiones de n en exactamente k partes positivas."""
    if int(n) < 1 or int(k) < 1:
        raise ConfigError(f"count_partitions needs n >= 1 and k >= 1, got n={n}, k={k}")
    return _TABLE.count(int(n), int(k))


def count_compositions(n: int, k: int) -> int:
    if int(n) < 1 or int(k) < 1:
        raise ConfigError(f"count_compositions needs n >= 1 and k >= 1, got n={n}, k={k}")
    return math.comb(int(n) - 1, int(k) - 1) if k <= n else 0


def total_partitions(n: int) -> int:
    """p(n) por la recurrencia pentagonal de Euler (independiente de la tabla p(n,k))."""
    p = [1] + [0] * int(n)
    for m in range(1, int(n) + 1):
        s, j = 0, 1
        while True:
            g1 = j * (3 * j - 1) // 2
            if g1 > m:
                break
            sign = 1 if j % 2 else -1
            s += sign * p[m - g1]
            g2 = j * (3 * j + 1) // 2
            if g2 <= m:
                s += sign * p[m - g2]
            j += 1
        p[m] = s
    return p[int(n)]


def _check_nk(n: int, k: int) -> Tuple[int, int]:
    n, k = int(n), int(k)
    if k < 1 or n < 1:
        raise ConfigError(f"n and k must be positive, got n={n}, k={k}")
    if k > n:
        raise ConfigError(f"cannot split n={n} into k={k} positive parts")
    return n, k


# ---------------------------------------------------------------------
# Rangos
# ---------------------------------------------------------------------
def unrank_partition(rank: int, n: int, k: int) -> Partition:
    """Partición de rango `rank` (0 <= rank < p(n,k)), partes en orden no creciente."""
    n, k = _check_nk(n, k)
    total = count_partitions(n, k)
    rank = int(rank)
    if not 0 <= rank < total:
        raise ConfigError(f"rank {rank} outside [0, {total})")
    small: List[int] = []   # partes en orden creciente
    add = 0
    while k > 0:
        if k == 1:
            small.append(n + add)
            break
        if n == k:
            small.extend([1 + add] * k)
            break
        with_one = _TABLE.count(n - 1, k - 1)
        if rank < with_one:
            small.append(1 + add)
            n, k = n - 1, k - 1
        else:
            rank -= with_one
            n -= k
            add += 1
    return tuple(reversed(small))


def rank_partition(parts: Partition) -> int:
    """Inversa de unrank_partition."""
    asc = sorted(int(p) for p in parts)
    if not asc or asc[0] < 1:
        raise ConfigError(f"not a partition into positive parts: {parts}")
    n, k = sum(asc), len(asc)
    rank, add, i = 0, 0, 0
    while k > 1 and n > k:
        if asc[i] - add == 1:
            i += 1
            n, k = n - 1, k - 1
        else:
            rank += _TABLE.count(n - 1, k - 1)
            n -= k
            add += 1
    return rank


# ---------------------------------------------------------------------
# Enumeración
# ---------------------------------------------------------------------
def _descending(n: int, k: int, cap: int) -> Iterator[Partition]:
    if k == 0:
        if n == 0:
            yield ()
        return
    lo = -(-n // k)
    for first in range(min(cap, n - k + 1), lo - 1, -1):
        for rest in _descending(n - first, k - 1, first):
            yield (first,) + rest


def enumerate_partitions(n: int, k: int) -> List[Partition]:
    """Lista completa en orden lexicográfico decreciente, p. ej. (6,3) → [(4,1,1),(3,2,1),(2,2,2)]."""
    n, k = int(n), int(k)
    if n > PARTITION_ENUM_MAX_N:
        raise ConfigError(f"enumerate_partitions refuses n={n} > {PARTITION_ENUM_MAX_N}")
    if n < 1 or k < 1 or k > n:
        return []
    return list(_descending(n, k, n))


def enumerate_compositions(n: int, k: int) -> List[Tuple[int, ...]]:
    n, k = _check_nk(n, k)
    if count_compositions(n, k) > 2_000_000:
        raise ConfigError(f"too many compositions of n={n} into k={k} parts to enumerate")
    out = []
    for cuts in combinations(range(1, n), k - 1):
        edges = (0,) + cuts + (n,)
        out.append(tuple(edges[i + 1] - edges[i] for i in range(k)))
    return out


# ---------------------------------------------------------------------
# Muestreo
# ---------------------------------------------------------------------
def _uniform_below(bound: int, rng: np.random.Generator) -> int:
    """Entero uniforme en [0, bound) para bound de precisión arbitraria."""
    if bound < 2**62:
        return int(rng.integers(0, bound))
    bits = bound.bit_length()
    nbytes = (bits + 7) // 8
    mask = (1 << bits) - 1
    while True:
        v = int.from_bytes(rng.bytes(nbytes), "little") & mask
        if v < bound:
            return v


@lru_cache(maxsize=64)
def _boltzmann_parameter(n: int, k: int) -> float:
    """s con E[Σ j·Z_j] = n, Z_j ~ Geom(1 − e^{−s j}) y Z_k >= 1."""
    j = np.arange(1, k, dtype=float)

    def excess(s: float) -> float:
        return float((j * np.exp(-s * j) / -np.expm1(-s * j)).sum() + k / -np.expm1(-s * k) - n)

    return brentq(excess, 1e-12, 60.0, xtol=1e-15)


def _sample_boltzmann(n: int, k: int, rng: np.random.Generator) -> Partition:
    """
    Muestreo exacto por divide y vencerás: la conjugada de la partición tiene
    multiplicidades Z_1..Z_k geométricas independientes (Z_k >= 1). Se sortean
    Z_2..Z_k, Z_1 queda fijado por la suma y se acepta con prob. P(Z_1=r)/max P(Z_1).
    """
    s = _boltzmann_parameter(n, k)
    j = np.arange(2, k + 1)
    p = -np.expm1(-s * j)
    x1 = math.exp(-s)
    for attempt in range(1, BOLTZMANN_MAX_ATTEMPTS + 1):
        z = rng.geometric(p) - 1
        z[-1] += 1
        r = n - int((j * z).sum())
        if r >= 0 and rng.random() < x1 ** r:
            mult = np.concatenate(([r], z))
            parts = np.cumsum(mult[::-1])[::-1]
            if debug_enabled():
                dbg("partitions.boltzmann.accept", n=n, k=k, attempts=attempt)
            return tuple(int(v) for v in parts)
    raise RuntimeError(f"Boltzmann sampler did not accept after {BOLTZMANN_MAX_ATTEMPTS} attempts")


def sample_partition_uniform(n: int, k: int, rng: np.random.Generator, method: str | None = None) -> Partition:
    """Partición uniforme de n en k partes (no crecientes)."""
    n, k = _check_nk(n, k)
    if k == n:
        return (1,) * n
    if k == 1:
        return (n,)
    if method is None:
        method = "unrank" if (n + 1) * (k + 1) <= UNRANK_MAX_ENTRIES else "boltzmann"
    if method == "unrank":
        return unrank_partition(_uniform_below(count_partitions(n, k), rng), n, k)
    if method == "boltzmann":
        return _sample_boltzmann(n, k, rng)
    raise ConfigError(f"unknown partition sampling method {method!r}")


def sample_composition_uniform(n: int, k: int, rng: np.random.Generator) -> Tuple[int, ...]:
    """Composición uniforme: k−1 cortes distintos entre los n−1 huecos."""
    n, k = _check_nk(n, k)
    if k == 1:
        return (n,)
    cuts = np.sort(rng.choice(n - 1, size=k - 1, replace=False)) + 1
    edges = np.concatenate(([0], cuts, [n]))
    return tuple(int(v) for v in np.diff(edges))


def sample_pool_sizes(n: int, k: int, mode: str, rng: np.random.Generator) -> Tuple[int, ...]:
    if mode == "partition":
        return sample_partition_uniform(n, k, rng)
    if mode == "composition":
        return sample_composition_uniform(n, k, rng)
    raise ConfigError(f"unknown pooling mode {mode!r}")


# ---------- muestreo por bloques (oráculos Monte Carlo) ----------
@lru_cache(maxsize=32)
def _partition_block_table(n: int, k: int) -> np.ndarray:
    table = np.array([unrank_partition(r, n, k) for r in range(count_partitions(n, k))], dtype=np.int64)
    table.setflags(write=False)
    return table


def sample_pool_sizes_block(n: int, k: int, mode: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Matriz (size, k) de tamaños de pool; filas independientes con la ley del modo."""
    n, k = _check_nk(n, k)
    if k == 1:
        return np.full((size, 1), n, dtype=np.int64)
    if mode == "partition":
        if (n + 1) * (k + 1) <= UNRANK_MAX_ENTRIES and count_partitions(n, k) <= BLOCK_TABLE_MAX:
            table = _partition_block_table(n, k)
            return table[rng.integers(0, len(table), size=size)]
        return np.array([sample_partition_uniform(n, k, rng) for _ in range(size)], dtype=np.int64)
    if mode == "composition":
        if n - 1 <= 64:
            keys = rng.random((size, n - 1))
            cuts = np.sort(np.argsort(keys, axis=1)[:, : k - 1], axis=1) + 1
            edges = np.concatenate(
                [np.zeros((size, 1), dtype=np.int64), cuts, np.full((size, 1), n, dtype=np.int64)], axis=1
            )
            return np.diff(edges, axis=1)
        return np.array([sample_composition_uniform(n, k, rng) for _ in range(size)], dtype=np.int64)
    raise ConfigError(f"unknown pooling mode {mode!r}")
