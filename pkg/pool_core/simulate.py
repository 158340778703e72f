# pool_core/simulate.py
"""
Modelo generativo: muestra Bernoulli(μ_n), pools según una partición (o
composición) uniforme de n en k partes, test perfecto por pool, y las dos
medidas empíricas P1 (1/n por individuo) y P2 (1/k por pool).

Los individuos se asignan a los pools en orden (los N_1 primeros al pool 1,
etc.). Como los resultados son i.i.d., cualquier regla de asignación da la
misma ley conjunta de (P1, P2).
"""
from __future__ import annotations
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from pool_core.errors import ConfigError
from pool_core.partitions import sample_pool_sizes, sample_pool_sizes_block
from pool_core.schema import BinaryMeasure, PoolLaw, PoolType, SimConfig, TrialRecord
from pool_core import aggregator
from utils.debug_console import dbg, debug_enabled

# etiquetas de spawn_key para no mezclar flujos por trial con flujos por bloque
_TRIAL_STREAM = 0
_BLOCK_STREAM = 1
BLOCK_CELLS = 1 << 22      # tamaño máximo (trials x n) de un bloque vectorizado


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Flujo independiente para el trial `index`, derivado sólo de (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(_TRIAL_STREAM, int(index))))


def block_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(_BLOCK_STREAM, int(index))))


# ---------------------------------------------------------------------
# Medidas empíricas
# ---------------------------------------------------------------------
def _positives_per_pool(parts: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    starts = np.cumsum(parts) - parts
    return np.add.reduceat(outcomes, starts)


def empirical_measures(partition: Sequence[int], outcomes: Sequence[int]) -> Tuple[BinaryMeasure, PoolLaw]:
    """P1 con pesos 1/n y P2 con pesos 1/(nβ_n) = 1/k, en aritmética racional."""
    parts = np.asarray(partition, dtype=np.int64)
    x = np.asarray(outcomes, dtype=np.int64)
    if parts.ndim != 1 or len(parts) == 0 or np.any(parts < 1):
        raise ConfigError(f"partition must be a nonempty list of positive integers, got {partition!r}")
    if int(parts.sum()) != len(x):
        raise ConfigError(f"partition sums to {int(parts.sum())} but there are {len(x)} outcomes")
    if np.any((x != 0) & (x != 1)):
        raise ConfigError("outcomes must be 0/1")
    n, k = len(x), len(parts)
    pos = _positives_per_pool(parts, x)
    pairs, counts = np.unique(np.stack([parts, pos], axis=1), axis=0, return_counts=True)
    P2 = PoolLaw.from_counts({PoolType(int(m), int(c)): int(cnt) for (m, c), cnt in zip(pairs, counts)}, k)
    n1 = int(x.sum())
    P1 = BinaryMeasure.probability(Fraction(n - n1, n), Fraction(n1, n))
    return P1, P2


# ---------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------
def run_trial(cfg: SimConfig, rng: np.random.Generator) -> TrialRecord:
    if float(cfg.beta_n) * float(cfg.q1) > 1 + 1e-12:
        raise ConfigError("success probability beta_n*q1 exceeds 1")
    parts = sample_pool_sizes(cfg.n, cfg.k, cfg.mode, rng)
    outcomes = (rng.random(cfg.n) < cfg.mu_n).astype(np.int64)
    pos = _positives_per_pool(np.asarray(parts, dtype=np.int64), outcomes)
    P1, P2 = empirical_measures(parts, outcomes)
    n1 = int(outcomes.sum())
    return TrialRecord(
        partition=tuple(parts),
        positives_per_pool=tuple(int(c) for c in pos),
        I=Fraction(n1, cfg.n),
        sigma=Fraction(int((pos >= 1).sum()), cfg.k),
        P1=P1,
        P2=P2,
    )


def _run_chunk(cfg: SimConfig, indices: Sequence[int]) -> List[Tuple[int, int, int, Dict[Tuple[int, int], int]]]:
    out = []
    for t in indices:
        rec = run_trial(cfg, trial_rng(cfg.seed, t))
        hist = {(pt.m, pt.c): int(w * cfg.k) for pt, w in rec.P2.atoms}
        out.append((int(t), rec.n_positive, rec.n_positive_pools, hist))
    return out


@dataclass(frozen=True)
class BatchResult:
    config: SimConfig
    summaries: pd.DataFrame          # trial_index, n_positive, n_positive_pools
    aggregates: Dict[str, Fraction]  # medias y varianzas exactas de I y σ
    pool_histogram: pd.DataFrame     # m, c, pools (conteo sobre todos los trials)


def _chunks(trials: int, workers: int) -> List[List[int]]:
    size = max(1, -(-trials // (4 * workers)))
    return [list(range(i, min(i + size, trials))) for i in range(0, trials, size)]


def run_batch(cfg: SimConfig, trials: int, workers: int = 1) -> BatchResult:
    """Trials independientes; los agregados no dependen del orden ni del número de workers."""
    trials, workers = int(trials), max(1, int(workers))
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if debug_enabled():
        dbg("simulate.batch.start", trials=trials, workers=workers, **cfg.to_dict())
    chunks = _chunks(trials, workers)
    rows: List[Tuple[int, int, int, Dict[Tuple[int, int], int]]] = []
    if workers == 1:
        for ch in chunks:
            rows.extend(_run_chunk(cfg, ch))
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for part in ex.map(_run_chunk, [cfg] * len(chunks), chunks):
                rows.extend(part)
    rows.sort(key=lambda r: r[0])
    summaries = pd.DataFrame(
        [(t, n1, npp) for t, n1, npp, _ in rows],
        columns=["trial_index", "n_positive", "n_positive_pools"],
    )
    result = BatchResult(
        config=cfg,
        summaries=summaries,
        aggregates=aggregator.aggregate_trials(summaries, cfg.n, cfg.k),
        pool_histogram=aggregator.pooled_histogram(h for *_, h in rows),
    )
    if debug_enabled():
        dbg("simulate.batch.done", trials=trials, mean_I=float(result.aggregates["mean_I"]))
    return result


# ---------------------------------------------------------------------
# Simulación vectorizada por bloques (oráculos Monte Carlo)
# ---------------------------------------------------------------------
def simulate_counts(cfg: SimConfig, size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """(positivos, pools positivos) de `size` trials independientes del modelo."""
    n, k = cfg.n, cfg.k
    sizes = sample_pool_sizes_block(n, k, cfg.mode, size, rng)
    x = rng.random((size, n)) < cfg.mu_n
    cs = np.zeros((size, n + 1), dtype=np.int64)
    np.cumsum(x, axis=1, out=cs[:, 1:])
    ends = np.cumsum(sizes, axis=1)
    per_pool = np.take_along_axis(cs, ends, axis=1) - np.take_along_axis(cs, ends - sizes, axis=1)
    return cs[:, n], (per_pool > 0).sum(axis=1)


def _tally_block(cfg: SimConfig, index: int, size: int) -> np.ndarray:
    n_pos, n_pools = simulate_counts(cfg, size, block_rng(cfg.seed, index))
    tally = np.zeros((cfg.n + 1, cfg.k + 1), dtype=np.int64)
    np.add.at(tally, (n_pos, n_pools), 1)
    return tally


def simulate_tally(cfg: SimConfig, trials: int, workers: int = 1) -> np.ndarray:
    """
    Tabla (n+1) x (k+1) con el número de trials por (positivos, pools positivos).
    Los bloques tienen tamaño fijo y semilla propia, así que el resultado no
    depende de `workers`.
    """
    trials = int(trials)
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    block = max(1, min(trials, BLOCK_CELLS // cfg.n))
    plan = [(i, min(block, trials - i * block)) for i in range(-(-trials // block))]
    if debug_enabled():
        dbg("simulate.tally.start", trials=trials, blocks=len(plan), workers=workers, **cfg.to_dict())
    if workers <= 1 or len(plan) == 1:
        parts = [_tally_block(cfg, i, s) for i, s in plan]
    else:
        with ProcessPoolExecutor(max_workers=int(workers)) as ex:
            parts = list(ex.map(_tally_block, [cfg] * len(plan), [i for i, _ in plan], [s for _, s in plan]))
    return np.sum(parts, axis=0)
