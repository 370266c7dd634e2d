"""
Weighted undirected graph in compressed sparse row form.

The Laplacian L = D - W is never stored; it is applied through
``laplacian_apply`` and only densified for small reference computations.
"""
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from shared.errors import GraphError
from shared.logging_config import get_logger

logger = get_logger("graph")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable weighted undirected graph.

    Row ``i`` of the CSR arrays lists the neighbors of node ``i`` (sorted by
    id) together with the edge weights; every undirected edge is stored twice.
    """
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    degrees: np.ndarray
    node_ids: Optional[np.ndarray] = None
    name: str = "graph"

    def __post_init__(self):
        for array in (self.indptr, self.indices, self.weights, self.degrees):
            array.flags.writeable = False
        if __debug__:
            self.validate()

    @property
    def n(self) -> int:
        return int(self.degrees.shape[0])

    @property
    def m(self) -> int:
        return int(self.indices.shape[0] // 2)

    @property
    def d_max(self) -> float:
        return float(self.degrees.max()) if self.n else 0.0

    @property
    def d_avg(self) -> float:
        return float(self.degrees.sum() / self.n) if self.n else 0.0

    def neighbors(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """Neighbor ids and edge weights of node ``i``"""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    @cached_property
    def entry_rows(self) -> np.ndarray:
        """Row (source node) of every CSR entry"""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        rows.flags.writeable = False
        return rows

    @cached_property
    def cum_weights(self) -> np.ndarray:
        """Cumulative edge weight within each row, used for neighbor draws"""
        running = np.concatenate(([0.0], np.cumsum(self.weights)))
        cum = running[1:] - running[self.indptr[:-1]][self.entry_rows]
        cum.flags.writeable = False
        return cum

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weights, self.indices, self.indptr), shape=(self.n, self.n))

    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.degrees) - self.adjacency).tocsr()

    def laplacian_dense(self) -> np.ndarray:
        return self.laplacian().toarray()

    def edge_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Each undirected edge once as (rows, cols, weights) with rows < cols"""
        mask = self.entry_rows < self.indices
        return self.entry_rows[mask], self.indices[mask], self.weights[mask]

    def validate(self) -> None:
        """Check symmetry, simplicity, positivity and the degree sums"""
        n = self.n
        if self.indptr.shape[0] != n + 1 or self.indptr[-1] != self.indices.shape[0]:
            raise GraphError("Inconsistent CSR row pointer")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= n):
            raise GraphError("Neighbor id out of range")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise GraphError("Edge weights must be finite and strictly positive")
        if np.any(self.entry_rows == self.indices):
            raise GraphError("Self-loops are not allowed")
        if self.indices.size:
            # sorted, strictly increasing ids within each row
            same_row = self.entry_rows[1:] == self.entry_rows[:-1]
            if np.any(np.diff(self.indices)[same_row] <= 0):
                raise GraphError("Neighbor lists must be sorted without duplicates")
        if (self.adjacency != self.adjacency.T).nnz:
            raise GraphError("Adjacency is not symmetric")
        row_sums = np.bincount(self.entry_rows, weights=self.weights, minlength=n)
        if not np.allclose(row_sums, self.degrees, rtol=1e-12, atol=1e-12):
            raise GraphError("Degrees do not match row sums")


def from_arrays(
    rows: np.ndarray,
    cols: np.ndarray,
    weights: Optional[np.ndarray],
    n: int,
    name: str = "graph",
    node_ids: Optional[np.ndarray] = None,
) -> Graph:
    """Build a Graph from raw edge arrays.

    Self-loops are dropped; duplicate undirected edges keep the weight of
    their first occurrence.
    """
    if n < 1:
        raise GraphError(f"Graph needs at least one node, got n={n}")
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    if rows.shape != cols.shape:
        raise GraphError("Edge endpoint arrays differ in length")
    weights = (np.ones(rows.shape[0]) if weights is None
               else np.asarray(weights, dtype=float).ravel())
    if weights.shape != rows.shape:
        raise GraphError("Weight array length does not match edge count")

    if rows.size:
        if min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= n:
            raise GraphError(f"Node id out of range [0, {n})")
        if np.any(~(weights > 0)) or not np.all(np.isfinite(weights)):
            raise GraphError("Edge weights must be finite and strictly positive")

    keep = rows != cols
    dropped_loops = int((~keep).sum())
    rows, cols, weights = rows[keep], cols[keep], weights[keep]

    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    # np.unique reports the first occurrence of each key
    _, first = np.unique(lo * n + hi, return_index=True)
    dropped_dupes = int(lo.size - first.size)
    lo, hi, weights = lo[first], hi[first], weights[first]

    matrix = sp.coo_matrix(
        (np.concatenate([weights, weights]),
         (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
        shape=(n, n),
    ).tocsr()
    matrix.sort_indices()

    if dropped_loops or dropped_dupes:
        logger.debug("edges_cleaned", graph=name, self_loops=dropped_loops, duplicates=dropped_dupes)

    return Graph(
        indptr=matrix.indptr.astype(np.int64),
        indices=matrix.indices.astype(np.int64),
        weights=matrix.data.astype(float),
        degrees=np.asarray(matrix.sum(axis=1)).ravel().astype(float),
        node_ids=node_ids,
        name=name,
    )


def from_edge_list(
    edges: Iterable[Sequence[Union[int, float]]],
    n: int,
    name: str = "graph",
) -> Graph:
    """Build a Graph from (u, v) or (u, v, w) tuples; absent weights are 1.0"""
    rows, cols, weights = [], [], []
    for edge in edges:
        if len(edge) not in (2, 3):
            raise GraphError(f"Edge must be (u, v) or (u, v, w), got {edge!r}")
        rows.append(int(edge[0]))
        cols.append(int(edge[1]))
        weights.append(1.0 if len(edge) == 2 or edge[2] is None else float(edge[2]))
    return from_arrays(np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                       np.array(weights, dtype=float), n, name=name)


def laplacian_apply(g: Graph, x: np.ndarray) -> np.ndarray:
    """y = L x, for a vector of length n or an (n, s) block of vectors"""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != g.n or x.ndim > 2:
        raise GraphError(f"Dimension mismatch: expected leading size {g.n}, got shape {x.shape}")
    degrees = g.degrees if x.ndim == 1 else g.degrees[:, None]
    return degrees * x - g.adjacency @ x


def save_graph(g: Graph, path: Union[str, Path]) -> Path:
    """Write (n, edge triplets, node ids) as a compressed .npz file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols, weights = g.edge_arrays()
    node_ids = g.node_ids if g.node_ids is not None else np.arange(g.n)
    with open(path, "wb") as f:
        np.savez_compressed(f, n=g.n, rows=rows, cols=cols, weights=weights,
                            node_ids=node_ids, name=g.name)
    return path


def load_graph(path: Union[str, Path]) -> Graph:
    """Read a graph written by ``save_graph``"""
    try:
        with np.load(path, allow_pickle=False) as data:
            return from_arrays(data["rows"], data["cols"], data["weights"], int(data["n"]),
                               name=str(data["name"]), node_ids=data["node_ids"])
    except (OSError, KeyError, ValueError) as e:
        if isinstance(e, GraphError):
            raise
        raise GraphError(f"Cannot read graph file {path}: {e}") from e
