"""Top-k search algorithms: the index-based engine, the baselines and the oracle."""

from trajectory_keyword_search.search.baselines import (
    InvertedFile,
    if_top_k,
    irt_top_k,
    rt_top_k,
)
from trajectory_keyword_search.search.brute import brute_top_k
from trajectory_keyword_search.search.engine import (
    QueryStats,
    ctr,
    initial_radius,
    range_keyword_query,
    top_k,
)
from trajectory_keyword_search.search.rtree import (
    build_ir_tree,
    build_rtree,
    build_trajectory_rtree,
)

__all__ = [
    "InvertedFile",
    "QueryStats",
    "brute_top_k",
    "build_ir_tree",
    "build_rtree",
    "build_trajectory_rtree",
    "ctr",
    "if_top_k",
    "initial_radius",
    "irt_top_k",
    "range_keyword_query",
    "rt_top_k",
    "top_k",
]
