# utils/guards.py
from __future__ import annotations
from functools import lru_cache
from typing import Any, Callable, Dict, Optional, TypeVar
import os
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from pool_core.errors import ConfigError

T = TypeVar("T")

# Orden: flag explícito > variable POOLDEV_<NAME> > pooldev.toml [defaults] > default.
# El fichero se busca en el cwd; POOLDEV_CONFIG apunta a otro.
_ENV_PREFIX = "POOLDEV_"
_CONFIG_FILE = "pooldev.toml"


@lru_cache(maxsize=4)
def _load_defaults(path: str) -> Dict[str, Any]:
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        return {}
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML ({e})") from e
    section = data.get("defaults", {})
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: [defaults] must be a table")
    return section


def config_path() -> str:
    return os.environ.get(_ENV_PREFIX + "CONFIG") or os.path.join(os.getcwd(), _CONFIG_FILE)


def get_setting(name: str, default: T, cast: Optional[Callable[[Any], T]] = None, explicit: Any = None) -> T:
    """Valor efectivo del ajuste `name` según la precedencia de arriba."""
    if explicit is not None:
        value: Any = explicit
    else:
        env = os.environ.get(_ENV_PREFIX + name.upper())
        if env is not None and env.strip() != "":
            value = env.strip()
        else:
            value = _load_defaults(config_path()).get(name, default)
    if cast is None or value is None:
        return value
    try:
        return cast(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"setting {name}={value!r} is not valid: {e}") from e


def reset_settings_cache() -> None:
    _load_defaults.cache_clear()
