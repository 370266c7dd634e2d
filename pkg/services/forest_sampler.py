"""
Random spanning forest sampler: Wilson's algorithm with q-absorption.

At each occupancy of a node u outside the forest the walk is absorbed with
probability q / (q + d_u), making u a root; otherwise it moves to neighbor j
with probability w(u, j) / d_u. The walk also stops on hitting the forest,
and the loop-erased path is grafted onto it.
"""
import threading
from contextlib import nullcontext
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from graphs.graph import Graph
from shared.errors import GraphError
from shared.logging_config import get_logger

try:
    from numba import njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

logger = get_logger("forest-sampler")

# The plain-Python kernel seeds numpy's global generator
_KERNEL_LOCK = nullcontext() if NUMBA_AVAILABLE else threading.Lock()


@dataclass(frozen=True, eq=False)
class ForestSample:
    """One draw of the random rooted spanning forest"""
    root_of: np.ndarray            # root of every node
    parent: np.ndarray             # next node toward the root, -1 for roots
    roots: np.ndarray              # sorted root ids
    first_visit_roots: np.ndarray  # sorted ids rooted at their first occupancy
    tree_id: np.ndarray            # index of each node's tree, ordered by root id
    tree_sizes: np.ndarray
    steps: int

    @property
    def n(self) -> int:
        return int(self.root_of.shape[0])

    @property
    def root_count(self) -> int:
        return int(self.roots.shape[0])

    def key(self) -> tuple:
        """Hashable identity of the rooted forest (its parent map)"""
        return tuple(int(p) for p in self.parent)


@njit(cache=True, nogil=True)
def _wilson_kernel(indptr, indices, cum_weights, degrees, q, preset, conditional, seed):
    np.random.seed(seed)
    n = degrees.shape[0]
    in_forest = np.zeros(n, dtype=np.bool_)
    visited = np.zeros(n, dtype=np.bool_)
    first_root = np.zeros(n, dtype=np.bool_)
    succ = np.full(n, -1, dtype=np.int64)
    root_of = np.full(n, -1, dtype=np.int64)
    steps = 0

    for i in range(n):
        if preset[i]:
            in_forest[i] = True
            visited[i] = True
            first_root[i] = True
            root_of[i] = i

    for start in range(n):
        u = start
        while not in_forest[u]:
            steps += 1
            first = not visited[u]
            visited[u] = True
            d = degrees[u]
            p = q / (q + d)
            r = np.random.random()
            if not (conditional and first):
                if r < p:
                    in_forest[u] = True
                    root_of[u] = u
                    succ[u] = -1
                    if first:
                        first_root[u] = True
                    break
                r = (r - p) / (1.0 - p)
            # weight-proportional neighbor: first row entry with cum > r * d
            target = r * d
            lo = indptr[u]
            hi = indptr[u + 1] - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if cum_weights[mid] <= target:
                    lo = mid + 1
                else:
                    hi = mid
            succ[u] = indices[lo]
            u = indices[lo]

        # last-exit pointers from start trace the loop-erased path
        end_root = root_of[u]
        v = start
        while not in_forest[v]:
            in_forest[v] = True
            root_of[v] = end_root
            v = succ[v]

    return succ, root_of, first_root, steps


def _as_kernel_seed(rng: Optional[Union[np.random.Generator, int]]) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2 ** 32 - 1))
    if rng is None:
        return int(np.random.default_rng().integers(0, 2 ** 32 - 1))
    return int(rng) % (2 ** 32 - 1)


def forest_from_parents(parent: np.ndarray, first_visit_roots: Optional[np.ndarray] = None,
                        steps: int = 0) -> ForestSample:
    """Build a ForestSample from a parent map (-1 marks roots)"""
    parent = np.asarray(parent, dtype=np.int64)
    n = parent.shape[0]
    root_of = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        path = []
        v = i
        while root_of[v] < 0 and parent[v] >= 0:
            path.append(v)
            v = parent[v]
            if len(path) > n:
                raise GraphError("Parent map contains a cycle")
        r = root_of[v] if root_of[v] >= 0 else v
        root_of[v] = r
        root_of[path] = r
    return _assemble(parent, root_of, first_visit_roots, steps)


def _assemble(parent, root_of, first_visit_roots, steps) -> ForestSample:
    roots, tree_id, tree_sizes = np.unique(root_of, return_inverse=True, return_counts=True)
    if first_visit_roots is None:
        first_visit_roots = np.empty(0, dtype=np.int64)
    return ForestSample(
        root_of=root_of,
        parent=parent,
        roots=roots,
        first_visit_roots=np.asarray(first_visit_roots, dtype=np.int64),
        tree_id=tree_id.astype(np.int64),
        tree_sizes=tree_sizes.astype(np.int64),
        steps=int(steps),
    )


def node_mask(g: Graph, nodes: Union[Iterable[int], np.ndarray]) -> np.ndarray:
    """Boolean membership mask of a node set, validating ids"""
    if isinstance(nodes, (set, frozenset)) or not hasattr(nodes, "__len__"):
        nodes = np.fromiter(nodes, dtype=np.int64)
    else:
        nodes = np.asarray(nodes)
    if nodes.dtype == np.bool_:
        if nodes.shape != (g.n,):
            raise GraphError(f"Node mask must have length {g.n}")
        return nodes.copy()
    nodes = nodes.astype(np.int64).ravel()
    if nodes.size and (nodes.min() < 0 or nodes.max() >= g.n):
        raise GraphError(f"Node id out of range [0, {g.n})")
    mask = np.zeros(g.n, dtype=np.bool_)
    mask[nodes] = True
    return mask


def _run(g: Graph, q: float, preset: np.ndarray, conditional: bool, rng) -> ForestSample:
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    seed = _as_kernel_seed(rng)
    with _KERNEL_LOCK:
        succ, root_of, first_root, steps = _wilson_kernel(
            g.indptr, g.indices, g.cum_weights, g.degrees, float(q), preset, conditional, seed)
    return _assemble(succ, root_of, np.flatnonzero(first_root), steps)


def sample_forest(g: Graph, q: float, rng: Optional[Union[np.random.Generator, int]] = None) -> ForestSample:
    """Draw a forest with P(phi) proportional to q^|roots| * prod of edge weights"""
    return _run(g, q, np.zeros(g.n, dtype=np.bool_), False, rng)


def sample_forest_conditional(
    g: Graph,
    q: float,
    roots: Union[Iterable[int], np.ndarray],
    rng: Optional[Union[np.random.Generator, int]] = None,
) -> ForestSample:
    """Draw a forest conditioned on its first-visit root set being ``roots``.

    The given nodes are installed as roots before any walk, and the first
    occupancy of every other node is forced not to absorb.
    """
    preset = node_mask(g, roots)
    isolated = (g.degrees == 0) & ~preset
    if isolated.any():
        raise GraphError(
            f"Isolated nodes always root at their first visit; missing from root set: "
            f"{np.flatnonzero(isolated)[:10].tolist()}")
    return _run(g, q, preset, True, rng)
