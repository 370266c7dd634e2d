"""
Graph representation, synthetic generators and edge-list ingestion
"""

from .graph import Graph, from_arrays, from_edge_list, laplacian_apply, save_graph, load_graph
from .generators import gen_barabasi_albert, gen_k_regular, gen_grid, gen_grid3d
from .ingest import load_snap, build_graph

__all__ = [
    "Graph",
    "from_arrays",
    "from_edge_list",
    "laplacian_apply",
    "save_graph",
    "load_graph",
    "gen_barabasi_albert",
    "gen_k_regular",
    "gen_grid",
    "gen_grid3d",
    "load_snap",
    "build_graph",
]
