"""
Reference search algorithms sharing the Match kernel.

- :func:`if_top_k` intersects trajectory-level posting lists of the query
  words and scores every survivor.
- :func:`rt_top_k` visits trajectories in order of their rectangle's distance
  to the query in an R-tree and stops once that distance exceeds the k-th best
  match distance.
- :func:`irt_top_k` does the same on an IR-tree and also skips subtrees whose
  pseudo document misses a query word.
"""

import heapq
import itertools
import logging
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

from trajectory_keyword_search.match import MatchCounters, match_min_dist
from trajectory_keyword_search.model import Query, TopKAnswer, TopKCollector, Trajectory
from trajectory_keyword_search.search.engine import QueryStats
from trajectory_keyword_search.search.rtree import RTree

logger = logging.getLogger(__name__)


class InvertedFile:
    """Word id to sorted ordinals of the trajectories containing it."""

    def __init__(self, postings: Dict[int, List[int]]) -> None:
        self._postings = postings

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory]) -> "InvertedFile":
        postings: Dict[int, List[int]] = {}
        for ordinal, traj in enumerate(trajectories):
            for word_id in traj.keyword_union():
                postings.setdefault(word_id, []).append(ordinal)
        return cls(postings)

    def postings(self, word_id: int) -> List[int]:
        return self._postings.get(word_id, [])

    def __len__(self) -> int:
        return len(self._postings)


def intersect(p1: Iterable[int], p2: Iterable[int]) -> Iterator[int]:
    """Two-pointer AND of two ascending posting lists."""
    i1 = iter(p1)
    i2 = iter(p2)
    a = next(i1, None)
    b = next(i2, None)
    while a is not None and b is not None:
        if a == b:
            yield a
            a = next(i1, None)
            b = next(i2, None)
        elif a < b:
            a = next(i1, None)
        else:
            b = next(i2, None)


def if_top_k(
    query: Query,
    inverted_file: InvertedFile,
    trajectories: Sequence[Trajectory],
    stats: Optional[QueryStats] = None,
) -> TopKAnswer:
    stats = stats if stats is not None else QueryStats()
    lists = sorted((inverted_file.postings(w) for w in query.keywords), key=len)
    survivors: Iterable[int] = lists[0]
    stats.postings_scanned += sum(len(p) for p in lists)
    for posting in lists[1:]:
        survivors = intersect(survivors, posting)

    collector = TopKCollector(query.k)
    counters = MatchCounters()
    for ordinal in survivors:
        stats.candidates += 1
        collector.offer(
            match_min_dist(query, trajectories[ordinal], collector.threshold, counters)
        )
    stats.add_counters(counters)
    return collector.answer()


def _best_first(
    query: Query,
    tree: RTree,
    trajectories: Sequence[Trajectory],
    stats: QueryStats,
    use_docs: bool,
) -> TopKAnswer:
    collector = TopKCollector(query.k)
    if tree.size == 0:
        return collector.answer()
    if use_docs and not query.keywords <= tree.root.doc:
        return collector.answer()

    counters = MatchCounters()
    tie = itertools.count()
    heap = [(0.0, next(tie), tree.root, None)]
    while heap:
        distance, _, node, ordinal = heapq.heappop(heap)
        if distance > collector.threshold:
            break
        if node is None:
            traj = trajectories[ordinal]
            if not use_docs and not query.keywords <= traj.keyword_union():
                continue
            stats.candidates += 1
            collector.offer(match_min_dist(query, traj, collector.threshold, counters))
            continue
        stats.iterations += 1
        for entry in node.entries:
            if use_docs and not query.keywords <= entry.doc:
                continue
            d = entry.rect.min_dist(query.point)
            heapq.heappush(heap, (d, next(tie), entry.child, entry.ordinal))
    stats.add_counters(counters)
    return collector.answer()


def rt_top_k(
    query: Query,
    tree: RTree,
    trajectories: Sequence[Trajectory],
    stats: Optional[QueryStats] = None,
) -> TopKAnswer:
    """Incremental nearest-rectangle search on a plain R-tree."""
    stats = stats if stats is not None else QueryStats()
    return _best_first(query, tree, trajectories, stats, False)


def irt_top_k(
    query: Query,
    ir_tree: RTree,
    trajectories: Sequence[Trajectory],
    stats: Optional[QueryStats] = None,
) -> TopKAnswer:
    """Best-first search on an IR-tree, pruning subtrees that miss a query word."""
    if not ir_tree.has_docs:
        raise ValueError("irt_top_k needs a tree built with word sets")
    stats = stats if stats is not None else QueryStats()
    return _best_first(query, ir_tree, trajectories, stats, True)
