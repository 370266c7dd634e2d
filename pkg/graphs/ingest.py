"""
Ingest Module - Parse SNAP edge lists and build graphs from specifications
"""
import hashlib
from dataclasses import replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from graphs.generators import gen_barabasi_albert, gen_grid, gen_grid3d, gen_k_regular
from graphs.graph import Graph, from_arrays, load_graph, save_graph
from shared.errors import GraphError
from shared.logging_config import get_logger
from shared.models import GraphSpec

logger = get_logger("ingest")


def _generate_cache_key(file_content: bytes) -> str:
    return f"graph-{hashlib.sha256(file_content).hexdigest()}"


def _parse_snap(raw: bytes, path: Path) -> Graph:
    """Parse '#'-commented lines of 'u v' or 'u v w' into a dense-id graph"""
    sources, targets, weights = [], [], []
    weighted = False
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise GraphError(f"{path}: not UTF-8 text") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"{path}:{lineno}: expected 2 or 3 columns, got {len(parts)}")
        try:
            sources.append(int(parts[0]))
            targets.append(int(parts[1]))
            if len(parts) == 3:
                weights.append(float(parts[2]))
                weighted = True
            else:
                weights.append(1.0)
        except ValueError as e:
            raise GraphError(f"{path}:{lineno}: cannot parse '{line}'") from e

    if not sources:
        raise GraphError(f"{path}: no edges found")

    labels, dense = np.unique(np.array(sources + targets, dtype=np.int64), return_inverse=True)
    half = len(sources)
    return from_arrays(dense[:half], dense[half:], np.array(weights) if weighted else None,
                       int(labels.size), name=path.stem, node_ids=labels)


def load_snap(path: Union[str, Path], cache_dir: Optional[Union[str, Path]] = None) -> Graph:
    """Load a SNAP edge list, remapping node labels to dense ids.

    With ``cache_dir`` the parsed graph is stored as .npz keyed by the file's
    SHA-256 and reused on the next call. The original labels are kept in
    ``Graph.node_ids``.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise GraphError(f"Cannot read edge list {path}: {e}") from e

    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"{_generate_cache_key(raw)}.npz"
        if cache_file.exists():
            try:
                g = load_graph(cache_file)
                logger.info("graph_cache_hit", path=str(path), cache=str(cache_file), n=g.n, m=g.m)
                return g
            except GraphError as e:
                logger.warning("graph_cache_unreadable", cache=str(cache_file), error=str(e))

    g = _parse_snap(raw, path)
    logger.info("snap_loaded", path=str(path), n=g.n, m=g.m)

    if cache_file is not None:
        try:
            save_graph(g, cache_file)
        except OSError as e:
            logger.warning("graph_cache_write_failed", cache=str(cache_file), error=str(e))
    return g


def _scaled(value: int, factor: float, minimum: int) -> int:
    return max(int(round(value * factor)), minimum)


def build_graph(spec: GraphSpec, scale: float = 1.0, cache_dir: Optional[Union[str, Path]] = None) -> Graph:
    """Materialize a GraphSpec; generated families shrink with ``scale``.

    A SNAP spec whose file is missing falls back to ``spec.fallback`` when
    one is given.
    """
    _require(spec)
    if spec.kind == "barabasi_albert":
        g = gen_barabasi_albert(_scaled(spec.n, scale, spec.k + 1), spec.k, spec.seed)
    elif spec.kind == "k_regular":
        n = _scaled(spec.n, scale, spec.k + 1)
        if (n * spec.k) % 2:
            n += 1
        g = gen_k_regular(n, spec.k, spec.seed)
    elif spec.kind == "grid3d":
        g = gen_grid3d(_scaled(spec.side, scale ** (1.0 / 3.0), 2), spec.periodic)
    elif spec.kind == "grid":
        dim = len(spec.shape or [])
        g = gen_grid([_scaled(s, scale ** (1.0 / max(dim, 1)), 2) for s in spec.shape or []], spec.periodic)
    elif spec.kind == "npz":
        g = load_graph(spec.path)
    elif spec.kind == "snap":
        if spec.path and Path(spec.path).exists():
            g = load_snap(spec.path, cache_dir=cache_dir)
        elif spec.fallback is not None:
            logger.warning("snap_file_missing_using_fallback", path=spec.path, fallback=spec.fallback.name)
            g = build_graph(spec.fallback, scale, cache_dir)
            return _renamed(g, f"{spec.name}~synthetic")
        else:
            raise GraphError(f"Edge list not found: {spec.path}")
    else:
        raise GraphError(f"Unsupported graph kind '{spec.kind}'")
    return _renamed(g, spec.name)


def _renamed(g: Graph, name: str) -> Graph:
    return replace(g, name=name)


_REQUIRED_FIELDS = {
    "barabasi_albert": ("n", "k"),
    "k_regular": ("n", "k"),
    "grid3d": ("side",),
    "grid": ("shape",),
    "npz": ("path",),
    "snap": (),
}


def _require(spec: GraphSpec) -> None:
    missing = [f for f in _REQUIRED_FIELDS.get(spec.kind, ()) if getattr(spec, f) is None]
    if missing:
        raise GraphError(f"Graph spec '{spec.name}' ({spec.kind}) is missing {missing}")
