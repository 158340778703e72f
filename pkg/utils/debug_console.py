# utils/debug_console.py
from __future__ import annotations
from collections import deque
import json
import logging
import os
import time

_LOGGER = logging.getLogger("pooldev")
_MAX_LINES = 5000

_state = {
    "enabled": os.environ.get("POOLDEV_DEBUG", "").strip().lower() in ("1", "true", "yes", "on"),
    "lines": deque(maxlen=_MAX_LINES),
}


def _to_jsonable(obj):
    try:
        if isinstance(obj, dict):
            return {str(k): _to_jsonable(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [_to_jsonable(x) for x in obj]
        if isinstance(obj, (str, int, float, bool)) or obj is None:
            return obj
        if hasattr(obj, "item"):  # escalares numpy
            return obj.item()
    except Exception:
        pass
    return str(obj)


def dbg(msg: str, **kv):
    """Añade una línea a la consola de debug y la reenvía al logger 'pooldev'."""
    ts = time.strftime("%Y-%m-%d %H:%M:%S")
    line = f"[{ts}] {msg}"
    if kv:
        try:
            payload = json.dumps(_to_jsonable(kv), ensure_ascii=False, sort_keys=True)
        except Exception:
            payload = str(kv)
        line += " " + payload
    _state["lines"].append(line)
    _LOGGER.debug(line)


def get_log_text() -> str:
    return "\n".join(_state["lines"])


def clear_log():
    _state["lines"].clear()


def set_debug_enabled(flag: bool):
    _state["enabled"] = bool(flag)
    if flag and not _LOGGER.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(message)s"))
        _LOGGER.addHandler(handler)
    if not flag:
        # el handler guarda el stderr de su momento; se recrea al reactivar
        for handler in list(_LOGGER.handlers):
            _LOGGER.removeHandler(handler)
    _LOGGER.setLevel(logging.DEBUG if flag else logging.WARNING)


def debug_enabled() -> bool:
    return bool(_state["enabled"])
