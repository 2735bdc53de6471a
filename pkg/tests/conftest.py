"""Pytest configuration and fixtures for homodyne-forge tests."""

import json
import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

from homodyne_forge.dataset import single_mode_plan, synthesize, two_mode_plan
from homodyne_forge.models import CovarianceMatrix, HomodyneDataset

# Covariance matrix of the OPO state used throughout the examples
G_O_ENTRIES = [[2.38, -0.53], [-0.53, 0.55]]

# Physical two-mode state with G14 - G23 != 0 (min ν ≈ 0.63)
CORRELATED_ENTRIES = [
    [1.0, 0.0, 0.125, 0.2165],
    [0.0, 1.0, -0.2165, 0.125],
    [0.125, -0.2165, 0.8, 0.0],
    [0.2165, 0.125, 0.0, 0.8],
]


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def vacuum() -> CovarianceMatrix:
    """Single-mode vacuum covariance I/2."""
    return CovarianceMatrix.vacuum(1)


@pytest.fixture
def g_o() -> CovarianceMatrix:
    """Squeezed thermal single-mode covariance."""
    return CovarianceMatrix(entries=G_O_ENTRIES)


@pytest.fixture
def correlated() -> CovarianceMatrix:
    """Correlated two-mode covariance."""
    return CovarianceMatrix(entries=CORRELATED_ENTRIES)


@pytest.fixture
def small_dataset(g_o: CovarianceMatrix) -> HomodyneDataset:
    """Small seeded single-mode dataset (9 phases × 400 samples, η = 0.9)."""
    return synthesize(g_o, None, eta=0.9, plan=single_mode_plan(9, 400), seed=3)


@pytest.fixture
def small_two_mode_dataset(correlated: CovarianceMatrix) -> HomodyneDataset:
    """Small seeded two-mode dataset with the arm-phase group."""
    return synthesize(correlated, None, eta=1.0, plan=two_mode_plan(7, 300), seed=5)


@pytest.fixture
def write_csv(temp_dir: Path):
    """Write raw CSV text into the temp directory and return its path."""

    def _write(text: str, name: str = "data.csv") -> Path:
        path = temp_dir / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def state_file(temp_dir: Path) -> Path:
    """Covariance JSON file of the squeezed thermal state."""
    path = temp_dir / "state.json"
    path.write_text(json.dumps({"modes": 1, "entries": G_O_ENTRIES}), encoding="utf-8")
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test-local randomness."""
    return np.random.default_rng(1234)
