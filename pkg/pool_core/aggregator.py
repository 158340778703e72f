# pool_core/aggregator.py
from __future__ import annotations
from fractions import Fraction
from typing import Dict, Iterable, Tuple

import pandas as pd


# ============================================================================
# Helpers internos
# ============================================================================

def _exact_mean_var(total: int, total_sq: int, count: int, scale: int) -> Tuple[Fraction, Fraction]:
    """Media y varianza muestral (divisor count−1) de x/scale a partir de sumas enteras."""
    mean = Fraction(total, count * scale)
    if count < 2:
        return mean, Fraction(0)
    var = Fraction(total_sq * count - total * total, count * (count - 1) * scale * scale)
    return mean, var


# ============================================================================
# Funciones públicas
# ============================================================================

def aggregate_trials(df: pd.DataFrame, n: int, k: int) -> Dict[str, Fraction]:
    """
    Agregados exactos de un batch: medias y varianzas de I = n_positive/n y
    σ = n_positive_pools/k. Sólo se usan sumas enteras, así que el resultado no
    depende del orden de los trials.
    """
    if df is None or df.empty:
        return {"trials": Fraction(0)}
    x = [int(v) for v in df["n_positive"]]
    y = [int(v) for v in df["n_positive_pools"]]
    count = len(x)
    mean_I, var_I = _exact_mean_var(sum(x), sum(v * v for v in x), count, n)
    mean_s, var_s = _exact_mean_var(sum(y), sum(v * v for v in y), count, k)
    return {
        "trials": Fraction(count),
        "mean_I": mean_I,
        "var_I": var_I,
        "mean_sigma": mean_s,
        "var_sigma": var_s,
    }


def pooled_histogram(hists: Iterable[Dict[Tuple[int, int], int]]) -> pd.DataFrame:
    """Suma los histogramas (m, c) -> pools de cada trial."""
    rows = [(m, c, cnt) for h in hists for (m, c), cnt in h.items()]
    if not rows:
        return pd.DataFrame(columns=["m", "c", "pools"])
    df = pd.DataFrame(rows, columns=["m", "c", "pools"])
    out = (
        df.groupby(["m", "c"], as_index=False)
        .agg(pools=("pools", "sum"))
        .sort_values(by=["m", "c"], kind="stable")
        .reset_index(drop=True)
    )
    out["pools"] = out["pools"].astype(int)
    return out


def trial_table(df: pd.DataFrame, n: int, k: int, t_of_sigma) -> pd.DataFrame:
    """Filas exportables por trial: trial_index, I, sigma, n_positive, n_positive_pools, t_hat."""
    if df is None or df.empty:
        return pd.DataFrame(columns=["trial_index", "I", "sigma", "n_positive", "n_positive_pools", "t_hat"])
    out = df.copy()
    out["I"] = out["n_positive"].astype(float) / n
    out["sigma"] = out["n_positive_pools"].astype(float) / k
    beta = k / n
    out["t_hat"] = out["sigma"].apply(lambda s: t_of_sigma(s, beta))
    return out[["trial_index", "I", "sigma", "n_positive", "n_positive_pools", "t_hat"]]
