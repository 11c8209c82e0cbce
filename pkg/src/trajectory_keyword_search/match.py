"""
Minimum match distance of one trajectory to a query.

:func:`match_min_dist` is the linear two-pointer kernel used by every search
algorithm.  It slides a window ``[b, ll]`` over the places, keeps one counter
per query word, and reuses the counters when the window start advances.  Given
the current k-th best distance ``threshold`` it skips work that cannot produce
a distance at or below it:

- a place farther than ``threshold`` from the query restarts the window after
  it, since every window containing it is too far;
- a start whose best conceivable distance already exceeds ``threshold`` is
  dropped;
- once ``[b, ll]`` matches, no longer window starting at ``b`` is tried;
- the scan ends when ``[b, n]`` no longer covers the query.

Contract: the returned distance is never below the true minimum match
distance, equals it whenever it is ``<= threshold``, and is infinite when the
trajectory does not match at all.

:func:`naive_min_match_dist` and :func:`enumerate_minimum_matches` are the
quadratic reference implementations used as oracles.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from trajectory_keyword_search.model import INFINITY, MatchResult, Query, Trajectory


@dataclass
class MatchCounters:
    """Work done by the kernel, accumulated across calls.

    Attributes:
        invocations: Number of :func:`match_min_dist` calls.
        counter_updates: Increments plus decrements of per-word counters.
        places_scanned: Places that entered a window.
    """

    invocations: int = 0
    counter_updates: int = 0
    places_scanned: int = 0


def match_min_dist(
    query: Query,
    traj: Trajectory,
    threshold: float = INFINITY,
    counters: Optional[MatchCounters] = None,
) -> MatchResult:
    """Minimum match distance of *traj* to *query*, pruned against *threshold*.

    Args:
        query: Query location and keywords.
        traj: Trajectory to score.  Places may carry words outside the query;
            they are ignored.
        threshold: Current k-th best distance ``V[k]``.
        counters: Optional instrumentation sink.

    Returns:
        A :class:`MatchResult` whose window is a minimum match.  Among minimum
        matches of equal distance the one with the smallest ``(s, e)`` wins.
    """
    qwords = query.keywords
    qx, qy = query.x, query.y
    places = traj.places
    n = len(places)
    prefix = traj.prefix_lengths
    near = [math.hypot(qx - p.x, qy - p.y) for p in places]

    counts: Dict[int, int] = dict.fromkeys(qwords, 0)
    missing = len(qwords)
    updates = 0
    scanned = 0

    best = INFINITY
    best_b = best_e = -1
    # Match found at [b, ll]; confirmed minimal once [b + 1, ll] stops matching.
    pending: Optional[Tuple[float, int, int]] = None
    b = 0
    ll = -1

    while True:
        if missing == 0:
            pending = (min(near[b], near[ll]) + (prefix[ll] - prefix[b]), b, ll)
            for w in places[b].keywords:
                c = counts.get(w)
                if c is not None:
                    counts[w] = c - 1
                    updates += 1
                    if c == 1:
                        missing += 1
            b += 1
            continue

        if pending is not None:
            if pending[0] < best:
                best, best_b, best_e = pending
            pending = None

        if ll == n - 1:
            break
        ll += 1

        if near[ll] > threshold:
            counts = dict.fromkeys(qwords, 0)
            missing = len(qwords)
            b = ll + 1
            continue

        scanned += 1
        for w in places[ll].keywords:
            c = counts.get(w)
            if c is not None:
                counts[w] = c + 1
                updates += 1
                if c == 0:
                    missing -= 1

        while b < ll and min(near[b], near[ll]) + (prefix[ll] - prefix[b]) > threshold:
            for w in places[b].keywords:
                c = counts.get(w)
                if c is not None:
                    counts[w] = c - 1
                    updates += 1
                    if c == 1:
                        missing += 1
            b += 1

    if counters is not None:
        counters.invocations += 1
        counters.counter_updates += updates
        counters.places_scanned += scanned

    if best == INFINITY:
        return MatchResult(traj.id, None, None, INFINITY)
    return MatchResult(traj.id, best_b + 1, best_e + 1, best)


def _minimal_ends(query: Query, traj: Trajectory) -> List[Optional[int]]:
    """For each 1-based start ``s``, the smallest ``e`` such that ``(s, e)`` matches."""
    qwords = query.keywords
    places = traj.places
    n = len(places)
    ends: List[Optional[int]] = []
    for s in range(n):
        covered = set()
        end = None
        for e in range(s, n):
            covered |= places[e].keywords & qwords
            if len(covered) == len(qwords):
                end = e + 1
                break
        ends.append(end)
    return ends


def enumerate_minimum_matches(query: Query, traj: Trajectory) -> List[Tuple[int, int]]:
    """All matching windows that contain no smaller matching window, ascending."""
    ends = _minimal_ends(query, traj)
    n = len(ends)
    windows = []
    for s in range(1, n + 1):
        e = ends[s - 1]
        if e is None:
            continue
        # (s, e) is minimal iff (s + 1, e) does not match.
        if s == n or ends[s] != e:
            windows.append((s, e))
    return windows


def naive_min_match_dist(query: Query, traj: Trajectory) -> MatchResult:
    """Reference minimum match distance by checking every window ``(s, e)``.

    The distance is the smallest match distance over all matching windows,
    minimal or not.  The witness is the first minimum match in ``(s, e)``
    order reaching that distance, or the first matching window reaching it
    when no minimum match does.
    """
    qwords = query.keywords
    qx, qy = query.x, query.y
    places = traj.places
    prefix = traj.prefix_lengths
    near = [math.hypot(qx - p.x, qy - p.y) for p in places]
    n = len(places)

    matching = [[False] * n for _ in range(n)]
    for s in range(n):
        covered = set()
        for e in range(s, n):
            covered |= places[e].keywords & qwords
            matching[s][e] = len(covered) == len(qwords)

    scored = [
        (min(near[s], near[e]) + (prefix[e] - prefix[s]), s, e)
        for s in range(n)
        for e in range(s, n)
        if matching[s][e]
    ]
    if not scored:
        return MatchResult(traj.id, None, None, INFINITY)
    best = min(d for d, _, _ in scored)
    reaching = [(s, e) for d, s, e in scored if d == best]

    def minimal(s: int, e: int) -> bool:
        return not (s < e and (matching[s + 1][e] or matching[s][e - 1]))

    best_s, best_e = next(((s, e) for s, e in reaching if minimal(s, e)), reaching[0])
    return MatchResult(traj.id, best_s + 1, best_e + 1, best)
