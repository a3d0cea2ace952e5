"""
Pytest configuration and common fixtures for twostage tests.

Fixture Scope Strategy:
- module: Immutable data (datasets, graphs) - created once per module
- function: Mutable objects or test state - fresh instance per test
"""

import numpy as np
import pytest

from twostage.core.graph_data import Graph
from twostage.core.logging import reset_output
from twostage.core.synthetic import clique_path_dataset

from .fixtures.graph_fixtures import MUTAG_DIR

# ============================================================================
# Module-scoped fixtures for immutable data (performance optimization)
# ============================================================================


@pytest.fixture(scope="module")
def synthetic_dataset():
    """Forty clique-vs-path graphs.

    Module-scoped because GraphDataset is immutable.
    """
    return clique_path_dataset(num_graphs=40, seed=0)


@pytest.fixture(scope="module")
def path_graph():
    """Undirected 4-node path with distinct node categories."""
    edges = [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]
    return Graph(4, np.array(edges), np.array([0, 1, 2, 3]), 0, "path-4")


@pytest.fixture(scope="module")
def mutag_dir():
    """Real MUTAG files, when present under tests/fixtures/data."""
    if not (MUTAG_DIR / "MUTAG_A.txt").is_file():
        pytest.skip("MUTAG data not available under tests/fixtures/data/MUTAG")
    return MUTAG_DIR


# ============================================================================
# Function-scoped fixtures for mutable/per-test state
# ============================================================================


@pytest.fixture(autouse=True)
def _reset_global_output():
    """Reset global output singleton around each test."""
    reset_output()
    yield
    reset_output()
