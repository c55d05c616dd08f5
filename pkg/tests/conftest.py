import os
from pathlib import Path

import numpy as np
import pytest

from gradient_gate.harness import settings as harness_settings
from gradient_gate.seeding import make_rng


@pytest.fixture()
def rng() -> np.random.Generator:
    """Deterministic generator for test data."""
    return make_rng(1234, 99)


@pytest.fixture()
def isolated_settings(tmp_path, monkeypatch):
    """Point the harness settings at a temporary directory and reset the cache."""
    monkeypatch.setenv("GRADIENT_GATE_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("GRADIENT_GATE_LOG_LEVEL", "WARNING")
    monkeypatch.setenv("GRADIENT_GATE_WORKERS", "1")
    monkeypatch.setenv("GRADIENT_GATE_PROGRESS", "false")
    harness_settings.get_settings.cache_clear()
    yield harness_settings.get_settings()
    harness_settings.get_settings.cache_clear()


@pytest.fixture()
def mnist_dir() -> Path:
    """Directory holding the real MNIST files; skips the test when they are missing."""
    from gradient_gate.densenet import mnist_available

    path = Path(os.environ.get("GRADIENT_GATE_DATA_DIR", "data/mnist"))
    if not mnist_available(path):
        pytest.skip(f"MNIST files not found in {path}")
    return path
