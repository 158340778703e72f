from __future__ import annotations
import math


def fmt_int(x):
    try:
        if x is None:
            return ""
        n = int(round(float(x)))
        return f"{n:,}"
    except Exception:
        return str(x) if x is not None else ""


def fmt_float(x, ndigits: int = 6):
    """Números para las líneas de resumen; ±inf se muestra como tal."""
    try:
        v = float(x)
    except Exception:
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.{ndigits}g}"


def fmt_status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"
