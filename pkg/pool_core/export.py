from __future__ import annotations
from typing import Any, Mapping
import csv
import json
import math

import pandas as pd


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):  # escalares numpy
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    try:
        return float(obj)  # Fraction
    except (TypeError, ValueError):
        return str(obj)


def df_to_csv_bytes(df: pd.DataFrame) -> bytes:
    """CSV RFC 4180 en UTF-8 con saltos LF; floats con repr, así que es determinista."""
    return df.to_csv(index=False, lineterminator="\n", quoting=csv.QUOTE_MINIMAL).encode("utf-8")


def payload_to_json_bytes(payload: Mapping[str, Any]) -> bytes:
    """JSON con claves ordenadas; ±inf se escribe como texto."""
    return (json.dumps(_jsonable(payload), ensure_ascii=False, sort_keys=True, indent=2) + "\n").encode("utf-8")
