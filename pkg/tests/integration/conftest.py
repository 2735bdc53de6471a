"""Pytest configuration for integration tests.

Integration tests synthesize acceptance-scale datasets (10⁵ to 10⁶ samples)
and run every estimator end to end. They are marked ``integration`` and
``slow``; both markers are declared in pyproject.toml.

Optional:
- HOMODYNE_SKIP_SLOW: Set to any value to skip the slow closed loops
"""

from __future__ import annotations

import os

import pytest

from homodyne_forge.dataset import single_mode_plan, synthesize
from homodyne_forge.models import CovarianceMatrix, HomodyneDataset
from tests.conftest import G_O_ENTRIES


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    """Skip slow tests when HOMODYNE_SKIP_SLOW is set."""
    if not os.environ.get("HOMODYNE_SKIP_SLOW"):
        return
    skip_slow = pytest.mark.skip(reason="HOMODYNE_SKIP_SLOW is set")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="module")
def vacuum_acceptance() -> HomodyneDataset:
    """Vacuum at η = 1, 31 phases × 10⁴ samples."""
    return synthesize(CovarianceMatrix.vacuum(1), None, 1.0, single_mode_plan(31, 10_000), seed=7)


@pytest.fixture(scope="module")
def g_o_fock_dataset() -> HomodyneDataset:
    """Squeezed thermal state at η = 1 with about 10⁵ samples."""
    G = CovarianceMatrix(entries=G_O_ENTRIES)
    return synthesize(G, None, 1.0, single_mode_plan(31, 3226), seed=11)
