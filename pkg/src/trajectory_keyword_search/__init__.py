"""
trajectory-keyword-search
=========================

Top-k spatial keyword search over trajectories whose places carry keywords.

Main areas:
- Data model and the linear-time match kernel (``trajectory_keyword_search.model``,
  ``trajectory_keyword_search.match``)
- Adaptive quadtree grid with Z-order cell codes (``trajectory_keyword_search.grid``)
- Cell-keyword conscious index with binary snapshots (``trajectory_keyword_search.index``)
- Incremental expansion search, baselines and brute force
  (``trajectory_keyword_search.search``)
- Analytical cost model (``trajectory_keyword_search.costmodel``)
- Corpus files and synthetic data (``trajectory_keyword_search.ingest``)

Quick start::

    from trajectory_keyword_search.grid import build_grid
    from trajectory_keyword_search.index import build_index
    from trajectory_keyword_search.ingest import encode_query, load_corpus
    from trajectory_keyword_search.search import top_k

    corpus = load_corpus("corpus.jsonl")
    grid = build_grid(corpus.trajectories, segment_limit=800, max_level=12)
    index = build_index(corpus.trajectories, grid, corpus.vocabulary)
    query = encode_query(index.vocabulary, 120.0, 45.0, ["museum", "cafe"], k=3)
    for result in top_k(query, index):
        print(result.traj_id, result.distance)
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
