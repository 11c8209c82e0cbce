"""Corpus and workload files, and synthetic data."""

from trajectory_keyword_search.ingest.corpus import (
    Corpus,
    encode_query,
    load_corpus,
    load_workload,
    save_corpus,
    save_workload,
)
from trajectory_keyword_search.ingest.synthetic import (
    WorkloadSpec,
    generate_corpus,
    generate_queries,
)

__all__ = [
    "Corpus",
    "WorkloadSpec",
    "encode_query",
    "generate_corpus",
    "generate_queries",
    "load_corpus",
    "load_workload",
    "save_corpus",
    "save_workload",
]
