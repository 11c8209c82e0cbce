"""Micro benchmarks of the search kernels, run with ``pytest --benchmark-only``."""

from trajectory_keyword_search.grid import build_grid
from trajectory_keyword_search.index import build_index
from trajectory_keyword_search.match import match_min_dist
from trajectory_keyword_search.search import brute_top_k, top_k
from trajectory_keyword_search.search.engine import ctr


def test_match_min_dist(benchmark, corpus, queries):
    query = queries[0]
    trajectories = corpus.trajectories[:200]

    def score_all():
        return [match_min_dist(query, traj).distance for traj in trajectories]

    distances = benchmark(score_all)
    assert len(distances) == len(trajectories)


def test_top_k(benchmark, corpus, index, queries):
    def answer_all():
        return [top_k(query, index) for query in queries]

    answers = benchmark(answer_all)
    for query, answer in zip(queries[:3], answers):
        assert answer.pairs() == brute_top_k(query, corpus.trajectories).pairs()


def test_ctr_whole_space(benchmark, index, queries):
    intervals = index.grid.window_to_intervals(index.grid.bounds)
    candidates = benchmark(ctr, queries[0], intervals, index)
    assert candidates


def test_build_index(benchmark, corpus):
    trajectories = corpus.trajectories[:500]

    def build():
        grid = build_grid(trajectories, 200, 10)
        return build_index(trajectories, grid, corpus.vocabulary)

    index = benchmark.pedantic(build, rounds=3, iterations=1)
    assert index.stats().trajectory_count == 500
