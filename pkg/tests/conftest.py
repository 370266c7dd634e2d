"""
Pytest fixtures and configuration
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from graphs.generators import gen_grid
from graphs.graph import from_edge_list


@pytest.fixture
def p2():
    """Path on two nodes with a unit edge"""
    return from_edge_list([(0, 1)], 2, name="p2")


@pytest.fixture
def triangle():
    """Complete graph on three nodes, Laplacian spectrum {0, 3, 3}"""
    return from_edge_list([(0, 1), (1, 2), (0, 2)], 3, name="triangle")


@pytest.fixture
def star9():
    """Star whose center has degree 9"""
    return from_edge_list([(0, i) for i in range(1, 10)], 10, name="star9")


@pytest.fixture
def path4_weighted():
    return from_edge_list([(0, 1, 2.0), (1, 2, 0.5), (2, 3, 1.5)], 4, name="path4_weighted")


@pytest.fixture
def small_graphs(p2, triangle, path4_weighted):
    """Tiny graphs for exhaustive checks, including an irregular weighted one"""
    kite = from_edge_list([(0, 1), (0, 2), (1, 2), (2, 3), (3, 4, 0.7)], 5, name="kite")
    return [p2, triangle, path4_weighted, kite]


@pytest.fixture
def grid20():
    """Non-periodic 20 x 20 grid"""
    return gen_grid((20, 20), periodic=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def snap_file(tmp_path):
    """Small SNAP-style edge list with comments and sparse labels"""
    path = tmp_path / "toy-edges.txt"
    path.write_text(
        "# Directed graph: toy\n"
        "# FromNodeId\tToNodeId\n"
        "10\t20\n"
        "20\t30\n"
        "30\t10\n"
        "30\t40\n"
        "40\t30\n"
        "50\t50\n"
    )
    return path
