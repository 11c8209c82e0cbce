"""The B^ck index, its storage layer and its snapshot format."""

from trajectory_keyword_search.index.bck import (
    BckIndex,
    CellScan,
    IndexStats,
    Vocabulary,
    associate_fragment_words,
    build_index,
)
from trajectory_keyword_search.index.snapshot import load_snapshot, save_snapshot
from trajectory_keyword_search.index.store import OrderedStore

__all__ = [
    "BckIndex",
    "CellScan",
    "IndexStats",
    "OrderedStore",
    "Vocabulary",
    "associate_fragment_words",
    "build_index",
    "load_snapshot",
    "save_snapshot",
]
