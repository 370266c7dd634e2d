"""
Synthetic graph families used by the benchmark
"""
from typing import Sequence

import networkx as nx
import numpy as np

from graphs.graph import Graph, from_arrays
from shared.errors import GraphError
from shared.logging_config import get_logger

logger = get_logger("generators")


def _from_networkx(G: nx.Graph, name: str) -> Graph:
    edges = np.array(G.edges(), dtype=np.int64).reshape(-1, 2)
    return from_arrays(edges[:, 0], edges[:, 1], None, G.number_of_nodes(), name=name)


def gen_barabasi_albert(n: int, k: int, rng_seed: int = 0) -> Graph:
    """Preferential attachment graph with exactly (n - k) * k edges.

    The seed is k isolated nodes; node k attaches to all of them (the star
    networkx starts from) and every later node attaches k distinct edges.
    """
    if not n > k >= 1:
        raise GraphError(f"Barabasi-Albert needs n > k >= 1, got n={n}, k={k}")
    g = _from_networkx(nx.barabasi_albert_graph(n, k, seed=rng_seed), name=f"barabasi_albert_{n}_{k}")
    logger.info("graph_generated", family="barabasi_albert", n=g.n, m=g.m, seed=rng_seed)
    return g


def gen_k_regular(n: int, k: int, rng_seed: int = 0) -> Graph:
    """Uniform-ish simple k-regular graph (pairing model with restarts)"""
    if (n * k) % 2 or not 0 <= k < n:
        raise GraphError(f"No simple {k}-regular graph on {n} nodes")
    g = _from_networkx(nx.random_regular_graph(k, n, seed=rng_seed), name=f"k_regular_{n}_{k}")
    logger.info("graph_generated", family="k_regular", n=g.n, m=g.m, seed=rng_seed)
    return g


def gen_grid(shape: Sequence[int], periodic: bool = True) -> Graph:
    """Nearest-neighbor lattice of any dimension; periodic wraps every axis"""
    shape = tuple(int(s) for s in shape)
    if not shape or min(shape) < 2:
        raise GraphError(f"Every grid side must be >= 2, got {shape}")
    index = np.arange(int(np.prod(shape)), dtype=np.int64).reshape(shape)
    rows, cols = [], []
    for axis in range(len(shape)):
        if periodic:
            rows.append(index.ravel())
            cols.append(np.roll(index, -1, axis=axis).ravel())
        else:
            lead = [slice(None)] * len(shape)
            tail = [slice(None)] * len(shape)
            lead[axis] = slice(0, -1)
            tail[axis] = slice(1, None)
            rows.append(index[tuple(lead)].ravel())
            cols.append(index[tuple(tail)].ravel())
    name = "grid_" + "x".join(map(str, shape)) + ("_periodic" if periodic else "")
    g = from_arrays(np.concatenate(rows), np.concatenate(cols), None, index.size, name=name)
    logger.info("graph_generated", family="grid", shape=list(shape), periodic=periodic, n=g.n, m=g.m)
    return g


def gen_grid3d(side: int, periodic: bool = True) -> Graph:
    return gen_grid((side, side, side), periodic=periodic)
