"""Shared corpora for the kernel timings."""

import pytest

from trajectory_keyword_search.config import GeneratorConfig
from trajectory_keyword_search.grid import build_grid
from trajectory_keyword_search.index import build_index
from trajectory_keyword_search.ingest import WorkloadSpec, generate_corpus, generate_queries

CORPUS = GeneratorConfig(trajectories=2000, places_per_trajectory=(20, 60), clustering=0.5, seed=1)


@pytest.fixture(scope="session")
def corpus():
    return generate_corpus(CORPUS)


@pytest.fixture(scope="session")
def index(corpus):
    grid = build_grid(corpus.trajectories, 200, 10)
    return build_index(corpus.trajectories, grid, corpus.vocabulary)


@pytest.fixture(scope="session")
def queries(corpus):
    spec = WorkloadSpec(query_count=20, keywords_per_query=2, k=10, seed=1)
    return generate_queries(corpus.trajectories, spec)
