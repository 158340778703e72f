from __future__ import annotations

import numpy as np
import pytest

from utils.debug_console import clear_log, set_debug_enabled
from utils.guards import reset_settings_cache

_ENV = ("POOLDEV_SEED", "POOLDEV_WORKERS", "POOLDEV_DEBUG", "POOLDEV_OUT_DIR", "POOLDEV_CONFIG")


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch, tmp_path):
    """Sin variables POOLDEV_* heredadas y con un cwd vacío (sin pooldev.toml)."""
    for name in _ENV:
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    reset_settings_cache()
    yield
    reset_settings_cache()
    set_debug_enabled(False)
    clear_log()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
