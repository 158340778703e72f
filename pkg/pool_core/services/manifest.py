from __future__ import annotations

# ---------------- Standard library ----------------
from typing import Any, Dict, List, Optional, Sequence
from datetime import datetime, timezone

# ---------------- Internal ----------------
from pool_core import __version__
from pool_core.errors import ConfigError
from pool_core.export import payload_to_json_bytes
from pool_core.schema import RunManifest

_VERSION = 1
_REQUIRED = ("command", "config")


# ---------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------
def build_manifest(command: str, config: Dict[str, Any], seed: Optional[int], argv: Sequence[str]) -> RunManifest:
    """
    Manifest de una ejecución:
    - command: subcomando (p. ej. "simulate" o "verify mc-decay")
    - config: todos los parámetros efectivos, ya resueltos (flags, env y defaults)
    - argv: los argumentos tal cual, para `replay`
    """
    return RunManifest(
        command=command,
        config=dict(config),
        seed=None if seed is None else int(seed),
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        argv=list(argv),
        version=_VERSION,
    )


def manifest_bytes(manifest: RunManifest) -> bytes:
    return payload_to_json_bytes(manifest.to_dict())


# ---------------------------------------------------------------------
# Import
# ---------------------------------------------------------------------
def replay_argv(obj: Dict[str, Any]) -> List[str]:
    """
    argv para reejecutar un manifest.

    Formatos soportados:
    - v1: {"version": 1, "command", "config", "argv", ...}; se reutiliza argv.
    """
    for key in _REQUIRED:
        if key not in obj:
            raise ConfigError(f"manifest is missing '{key}'")
    version = obj.get("version", _VERSION)
    if version != _VERSION:
        raise ConfigError(f"unsupported manifest version {version!r}")
    argv = obj.get("argv")
    if not isinstance(argv, list) or not argv or not all(isinstance(a, str) for a in argv):
        raise ConfigError("manifest argv must be a nonempty list of strings")
    if argv[0] == "replay":
        raise ConfigError("refusing to replay a replay manifest")
    return list(argv)
