# pool_core/repository.py
import json
import os
from typing import Any, Dict, Optional

from pool_core.errors import ConfigError
from utils.debug_console import dbg
from utils.guards import get_setting

MANIFEST_SUFFIX = ".manifest.json"


# -----------------------
# Rutas de salida
# -----------------------
def out_dir() -> str:
    """Directorio base de las salidas relativas (POOLDEV_OUT_DIR o el cwd)."""
    return get_setting("out_dir", os.getcwd())


def resolve_out_path(path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(out_dir(), path)


def manifest_path(out_path: str) -> str:
    return out_path + MANIFEST_SUFFIX


# -----------------------
# Escritura atómica
# -----------------------
def write_bytes_atomic(path: str, data: bytes) -> None:
    """Escribe en <path>.tmp y renombra, para no dejar ficheros a medias."""
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    tmp_path = path + ".tmp"
    with open(tmp_path, "wb") as f:
        f.write(data)
    os.replace(tmp_path, path)


def save_output(path: str, data: bytes, manifest: Optional[bytes] = None) -> str:
    """Guarda la salida y, si se da, su manifest al lado. Devuelve la ruta final."""
    final = resolve_out_path(path)
    write_bytes_atomic(final, data)
    if manifest is not None:
        write_bytes_atomic(manifest_path(final), manifest)
    dbg("repository.save", path=final, size=len(data), manifest=manifest is not None)
    return final


def load_manifest(path: str) -> Dict[str, Any]:
    """Lee un manifest JSON; acepta la ruta del manifest o la de la salida que acompaña."""
    candidates = [path] if path.endswith(".json") else []
    candidates.append(manifest_path(path))
    for p in candidates:
        try:
            with open(p, "r", encoding="utf-8") as f:
                obj = json.load(f)
        except FileNotFoundError:
            continue
        except json.JSONDecodeError as e:
            raise ConfigError(f"manifest {p} is not valid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise ConfigError(f"manifest {p} must hold a JSON object")
        return obj
    raise ConfigError(f"no manifest found at {path}")
