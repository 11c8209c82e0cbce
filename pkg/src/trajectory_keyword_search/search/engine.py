"""
Top-k search over the B^ck index by incremental window expansion.

:func:`top_k` starts with a square window whose half-side is estimated from
keyword frequencies, retrieves the trajectories posted under every query word
in the cells the window meets (:func:`ctr`), scores each new one with the
Match kernel and grows the window by the smallest leaf side until the k-th
best distance falls below the half-side.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import AbstractSet, Callable, Dict, List, Optional, Set

from trajectory_keyword_search.config import SearchConfig, WindowMode
from trajectory_keyword_search.grid import Rect, ZInterval
from trajectory_keyword_search.index.bck import BckIndex, IndexStats
from trajectory_keyword_search.match import MatchCounters, match_min_dist
from trajectory_keyword_search.model import Query, TopKAnswer, TopKCollector

logger = logging.getLogger(__name__)


@dataclass
class QueryStats:
    """Work counters for one or more queries.

    Attributes:
        candidates: Trajectories scored with the Match kernel.
        match_invocations: Kernel calls.
        counter_updates: Per-word counter changes inside the kernel.
        places_scanned: Places that entered a kernel window.
        postings_scanned: Posting list entries read from the index.
        cells_scanned: Cells returned by range scans.
        iterations: Window expansions (search algorithms) or nodes visited
            (tree baselines).
    """

    candidates: int = 0
    match_invocations: int = 0
    counter_updates: int = 0
    places_scanned: int = 0
    postings_scanned: int = 0
    cells_scanned: int = 0
    iterations: int = 0

    def add_counters(self, counters: MatchCounters) -> None:
        self.match_invocations += counters.invocations
        self.counter_updates += counters.counter_updates
        self.places_scanned += counters.places_scanned

    def merge(self, other: "QueryStats") -> None:
        for name, value in asdict(other).items():
            setattr(self, name, getattr(self, name) + value)

    def as_dict(self) -> Dict[str, int]:
        return asdict(self)


def initial_radius(
    query: Query, stats: IndexStats, df: Callable[[int], int]
) -> Optional[float]:
    """First window half-side expected to hold ``k`` matching trajectories.

    Returns ``None`` when some query word occurs in no trajectory, so the
    answer is empty.  The value is clamped between the smallest leaf side and
    the diagonal of the space.
    """
    n = stats.trajectory_count
    if n == 0:
        return None
    p = 1.0
    for word_id in query.keywords:
        count = df(word_id)
        if count <= 0:
            return None
        p *= count / n
    radius = math.sqrt(query.k * stats.space_area / (math.pi * n * p))
    diagonal = math.sqrt(2.0 * stats.space_area)
    return min(max(radius, stats.tau), diagonal)


def words_by_frequency(keywords: AbstractSet[int], df: Callable[[int], int]) -> List[int]:
    return sorted(keywords, key=lambda w: (df(w), w))


def ctr(
    query: Query,
    intervals: List[ZInterval],
    index: BckIndex,
    prune_intervals: bool = False,
    stats: Optional[QueryStats] = None,
) -> Set[int]:
    """Ordinals of trajectories posted under every query word within *intervals*.

    Words are processed rarest first.  With *prune_intervals*, each word
    narrows the intervals to the span of cells where it was found, and later
    words only look there.
    """
    candidates: Optional[Set[int]] = None
    active = list(intervals)
    for word_id in words_by_frequency(query.keywords, index.vocabulary.frequency):
        posted: Set[int] = set()
        narrowed = []
        for interval in active:
            scan = index.cells_in_interval(word_id, interval)
            if scan.shrunk is None:
                continue
            narrowed.append(scan.shrunk)
            for posting in scan.postings:
                posted.update(posting)
            if stats is not None:
                stats.cells_scanned += len(scan.cells)
                stats.postings_scanned += sum(len(p) for p in scan.postings)
        candidates = posted if candidates is None else candidates & posted
        if not candidates:
            return set()
        if prune_intervals:
            active = narrowed
    return candidates or set()


def subtract_intervals(outer: List[ZInterval], inner: List[ZInterval]) -> List[ZInterval]:
    """Parts of the sorted intervals *outer* not covered by the sorted *inner*."""
    result = []
    j = 0
    for interval in outer:
        start = interval.sid
        while j < len(inner) and inner[j].eid < start:
            j += 1
        k = j
        while k < len(inner) and inner[k].sid <= interval.eid:
            if inner[k].sid > start:
                result.append(ZInterval(start, inner[k].sid - 1))
            start = max(start, inner[k].eid + 1)
            k += 1
        if start <= interval.eid:
            result.append(ZInterval(start, interval.eid))
    return result


def top_k(
    query: Query,
    index: BckIndex,
    config: Optional[SearchConfig] = None,
    stats: Optional[QueryStats] = None,
) -> TopKAnswer:
    """The ``k`` trajectories with the smallest minimum match distance to *query*.

    Args:
        query: Query with integer word ids.
        index: Loaded index.
        config: Window mode; ``RING`` searches only the cells added by each
            expansion.
        stats: Optional counters sink.

    Returns:
        Up to ``k`` results sorted by ``(distance, traj_id)``.
    """
    config = config or SearchConfig()
    stats = stats if stats is not None else QueryStats()
    radius = initial_radius(query, index.stats(), index.vocabulary.frequency)
    if radius is None:
        logger.debug("Query %s has a word in no trajectory", sorted(query.keywords))
        return TopKAnswer()

    grid = index.grid
    tau = grid.tau
    # No place lies closer than the bounds.
    radius = max(radius, grid.bounds.min_dist(query.point))
    ring = WindowMode(config.window_mode) is WindowMode.RING
    collector = TopKCollector(query.k)
    counters = MatchCounters()
    seen: Set[int] = set()
    searched: List[ZInterval] = []

    while True:
        stats.iterations += 1
        window = Rect.square(query.point, radius)
        intervals = grid.window_to_intervals(window)
        if ring:
            fresh = subtract_intervals(intervals, searched)
            searched = intervals
            candidates = ctr(query, fresh, index, prune_intervals=True, stats=stats)
        else:
            candidates = ctr(query, intervals, index, stats=stats)

        new = sorted(candidates - seen)
        for ordinal in new:
            seen.add(ordinal)
            traj = index.restricted_trajectory(ordinal, query.keywords)
            collector.offer(match_min_dist(query, traj, collector.threshold, counters))
        stats.candidates += len(new)
        logger.debug(
            "Radius %.6f: %d candidates, %d new, threshold %s",
            radius, len(candidates), len(new), collector.threshold,
        )

        if collector.threshold < radius or window.contains_rect(grid.bounds):
            break
        radius += tau

    stats.add_counters(counters)
    return collector.answer()


def range_keyword_query(index: BckIndex, window: Rect, keywords: AbstractSet[int]) -> List[str]:
    """Ids of trajectories whose places inside *window* jointly hold all *keywords*."""
    if not keywords or any(index.vocabulary.frequency(w) == 0 for w in keywords):
        return []
    center = ((window.min_x + window.max_x) / 2.0, (window.min_y + window.max_y) / 2.0)
    query = Query(center[0], center[1], frozenset(keywords))
    found = []
    for ordinal in sorted(ctr(query, index.grid.window_to_intervals(window), index)):
        traj = index.restricted_trajectory(ordinal, query.keywords)
        covered = frozenset().union(
            *(p.keywords for p in traj.places if window.contains_point(p.point))
        )
        if query.keywords <= covered:
            found.append(traj.id)
    return sorted(found)
