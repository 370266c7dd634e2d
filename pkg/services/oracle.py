"""
Exact ground truth on tiny graphs.

Every rooted spanning forest is enumerated with its weight
q^|roots| * prod w(e), which gives the exact forest distribution and the
exact moments of the root-count and control-variate estimators.
"""
import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from graphs.graph import Graph
from services.baselines import dense_reference
from services.estimators import control_variate_bar, control_variate_tilde
from services.forest_sampler import ForestSample, forest_from_parents
from shared.config import Config
from shared.errors import LimitError
from shared.logging_config import get_logger

logger = get_logger("oracle")


@dataclass(frozen=True)
class EnumeratedForest:
    parent: Tuple[int, ...]   # edge orientation toward the roots, -1 for roots
    roots: Tuple[int, ...]
    weight: float


@dataclass(frozen=True, eq=False)
class ForestEnumeration:
    forests: List[EnumeratedForest]
    partition_function: float
    probabilities: np.ndarray
    q: float

    def __len__(self) -> int:
        return len(self.forests)

    def samples(self) -> Iterator[Tuple[ForestSample, float]]:
        """Each forest as a ForestSample with its probability"""
        for forest, prob in zip(self.forests, self.probabilities):
            yield forest_from_parents(np.array(forest.parent, dtype=np.int64)), float(prob)


@dataclass(frozen=True)
class ExactStats:
    """Exact moments under the forest distribution"""
    alpha: float
    sign: int
    mean_roots: float
    var_roots: float
    mean_c_tilde: float
    mean_c_bar: float
    var_c_tilde: float
    var_c_bar: float
    cov_tilde: float
    cov_bar: float
    alpha_star_tilde: float
    alpha_star_bar: float
    var_s_tilde: float
    var_s_bar: float
    expected_steps: Optional[float] = None


def _acyclic_subsets(n: int, edges: Sequence[Tuple[int, int, float]]) -> Iterator[Tuple[int, ...]]:
    """Indices of every edge subset without a cycle"""

    def extend(start: int, chosen: List[int], label: List[int]):
        yield tuple(chosen)
        for e in range(start, len(edges)):
            u, v, _ = edges[e]
            lu, lv = label[u], label[v]
            if lu == lv:
                continue
            merged = [lu if x == lv else x for x in label]
            chosen.append(e)
            yield from extend(e + 1, chosen, merged)
            chosen.pop()

    yield from extend(0, [], list(range(n)))


def _orient(n: int, adjacency: List[List[int]], roots: Sequence[int]) -> Tuple[int, ...]:
    parent = [-2] * n
    queue = deque()
    for r in roots:
        parent[r] = -1
        queue.append(r)
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if parent[v] == -2:
                parent[v] = u
                queue.append(v)
    return tuple(parent)


def _components(n: int, adjacency: List[List[int]]) -> List[List[int]]:
    seen = [False] * n
    components = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        stack, component = [s], []
        while stack:
            u = stack.pop()
            component.append(u)
            for v in adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        components.append(sorted(component))
    return components


def enumerate_forests(g: Graph, q: float, max_nodes: Optional[int] = None) -> ForestEnumeration:
    """All rooted spanning forests of ``g`` with their weights.

    Acyclic edge subsets are enumerated by backtracking, then every choice
    of one root per tree is taken.
    """
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    max_nodes = Config.ENUM_MAX_NODES if max_nodes is None else max_nodes
    if g.n > max_nodes:
        raise LimitError(f"Forest enumeration needs n <= {max_nodes}, graph '{g.name}' has n={g.n}")

    rows, cols, weights = g.edge_arrays()
    edges = [(int(u), int(v), float(w)) for u, v, w in zip(rows, cols, weights)]
    forests: List[EnumeratedForest] = []
    for subset in _acyclic_subsets(g.n, edges):
        adjacency: List[List[int]] = [[] for _ in range(g.n)]
        edge_weight = 1.0
        for e in subset:
            u, v, w = edges[e]
            adjacency[u].append(v)
            adjacency[v].append(u)
            edge_weight *= w
        components = _components(g.n, adjacency)
        weight = q ** len(components) * edge_weight
        for roots in itertools.product(*components):
            forests.append(EnumeratedForest(parent=_orient(g.n, adjacency, roots),
                                            roots=tuple(sorted(roots)), weight=weight))

    weights_arr = np.array([f.weight for f in forests])
    z = float(weights_arr.sum())
    logger.debug("forests_enumerated", graph=g.name, q=q, count=len(forests), partition_function=z)
    return ForestEnumeration(forests=forests, partition_function=z, probabilities=weights_arr / z, q=q)


def exact_stats(
    enum: ForestEnumeration,
    g: Graph,
    q: float,
    alpha: float = 0.0,
    sign: Optional[int] = None,
) -> ExactStats:
    """Exact means, variances and covariances of |rho|, c~ and c-"""
    sign = Config.CV_SIGN if sign is None else sign
    roots, tilde, bar, probs = [], [], [], []
    for f, prob in enum.samples():
        roots.append(f.root_count)
        tilde.append(control_variate_tilde(g, f, q)[0])
        bar.append(control_variate_bar(g, f, q)[0])
        probs.append(prob)
    roots, tilde, bar, probs = map(np.asarray, (roots, tilde, bar, probs))

    def mean(x):
        return float(probs @ x)

    def cov(x, y):
        return float(probs @ ((x - mean(x)) * (y - mean(y))))

    var_roots = cov(roots, roots)
    var_tilde, var_bar = cov(tilde, tilde), cov(bar, bar)
    cov_tilde, cov_bar = cov(roots, tilde), cov(roots, bar)

    def variance_at(var_c, cov_c):
        return var_roots + alpha ** 2 * var_c + 2.0 * sign * alpha * cov_c

    def optimal(var_c, cov_c):
        return -sign * cov_c / var_c if var_c > 0 else 0.0

    expected_steps = None
    if g.n <= Config.DENSE_LIMIT:
        K = dense_reference(g, q).K
        expected_steps = float(np.trace(K) + np.trace(K * (g.degrees / q)[None, :]))

    return ExactStats(
        alpha=alpha,
        sign=sign,
        mean_roots=mean(roots),
        var_roots=var_roots,
        mean_c_tilde=mean(tilde),
        mean_c_bar=mean(bar),
        var_c_tilde=var_tilde,
        var_c_bar=var_bar,
        cov_tilde=cov_tilde,
        cov_bar=cov_bar,
        alpha_star_tilde=optimal(var_tilde, cov_tilde),
        alpha_star_bar=optimal(var_bar, cov_bar),
        var_s_tilde=max(variance_at(var_tilde, cov_tilde), 0.0),
        var_s_bar=max(variance_at(var_bar, cov_bar), 0.0),
        expected_steps=expected_steps,
    )


def dense_root_matrix(f: ForestSample) -> np.ndarray:
    """S~ with S~[i, j] = 1 when j is the root of i"""
    S = np.zeros((f.n, f.n))
    S[np.arange(f.n), f.root_of] = 1.0
    return S


def dense_partition_matrix(f: ForestSample) -> np.ndarray:
    """S- with S-[i, j] = 1 / |tree| when i and j share a tree"""
    same_tree = f.tree_id[:, None] == f.tree_id[None, :]
    return same_tree / f.tree_sizes[f.tree_id][:, None]


def cv_trace_identity(g: Graph, f: ForestSample, q: float, alpha: float, variant: str = "tilde") -> float:
    """tr(S - alpha (K^-1 S - I)) for the dense S of one forest"""
    if variant == "tilde":
        S = dense_root_matrix(f)
    elif variant == "bar":
        S = dense_partition_matrix(f)
    else:
        raise ValueError(f"Unknown control variate variant '{variant}'")
    K_inv = g.laplacian_dense() / q + np.eye(g.n)
    return float(np.trace(S - alpha * (K_inv @ S - np.eye(g.n))))
