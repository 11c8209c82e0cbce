"""
Domain types and the match-distance definitions every other module builds on.

A :class:`Trajectory` is an ordered, immutable sequence of :class:`Place`
objects, each a planar point with a set of integer word ids.  A
:class:`Query` asks for the ``k`` trajectories with the smallest minimum
match distance to a location for a keyword set.

Place windows ``(s, e)`` are **1-based and inclusive** throughout the public
API.

Example::

    from trajectory_keyword_search.model import Place, Query, Trajectory, match_dist

    traj = Trajectory("t1", [Place(0, 0, {1}), Place(1, 0, {2}), Place(2, 0, {3})])
    query = Query(0, 1, {2, 3}, k=1)
    match_dist(query, traj, 2, 3)   # sqrt(2) + 1
"""

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import AbstractSet, FrozenSet, Iterable, Iterator, List, Optional, Tuple

from trajectory_keyword_search.errors import InvalidQueryError, PlaceIndexError

INFINITY = math.inf

Point = Tuple[float, float]


def dist(a: Point, b: Point) -> float:
    """Euclidean distance between two planar points."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class Place:
    """A point visited by a trajectory together with its keyword set."""

    x: float
    y: float
    keywords: FrozenSet[int] = frozenset()

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(
                "Place coordinates must be finite, got ({}, {})".format(self.x, self.y)
            )
        if not isinstance(self.keywords, frozenset):
            object.__setattr__(self, "keywords", frozenset(self.keywords))

    @property
    def point(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class Trajectory:
    """An ordered sequence of places with a unique identifier.

    Attributes:
        id: External identifier; identifiers order trajectories on ties.
        places: Non-empty tuple of :class:`Place`.
    """

    id: str
    places: Tuple[Place, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.places, tuple):
            object.__setattr__(self, "places", tuple(self.places))
        if not self.places:
            raise ValueError("Trajectory {!r} has no places".format(self.id))

    def __len__(self) -> int:
        return len(self.places)

    def __iter__(self) -> Iterator[Place]:
        return iter(self.places)

    @property
    def prefix_lengths(self) -> Tuple[float, ...]:
        """``prefix[i]`` is the path length from place 1 to place ``i + 1``."""
        cached = self.__dict__.get("_prefix")
        if cached is None:
            segments = (
                math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(self.places, self.places[1:])
            )
            cached = tuple(itertools.accumulate(segments, initial=0.0))
            object.__setattr__(self, "_prefix", cached)
        return cached

    def path_length(self, s: int, e: int) -> float:
        """Length of the polyline through places ``s..e`` (1-based, inclusive)."""
        prefix = self.prefix_lengths
        return prefix[e - 1] - prefix[s - 1]

    def keyword_union(self) -> FrozenSet[int]:
        return frozenset().union(*(p.keywords for p in self.places))

    def mbr(self) -> Tuple[float, float, float, float]:
        """Minimum bounding rectangle ``(min_x, min_y, max_x, max_y)``."""
        xs = [p.x for p in self.places]
        ys = [p.y for p in self.places]
        return (min(xs), min(ys), max(xs), max(ys))

    def restricted_to(self, keywords: AbstractSet[int]) -> "Trajectory":
        """Copy of this trajectory whose places only keep words in *keywords*."""
        return Trajectory(
            self.id, tuple(Place(p.x, p.y, p.keywords & keywords) for p in self.places)
        )


@dataclass(frozen=True)
class Query:
    """A top-k spatial keyword query."""

    x: float
    y: float
    keywords: FrozenSet[int]
    k: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.keywords, frozenset):
            object.__setattr__(self, "keywords", frozenset(self.keywords))
        if not self.keywords:
            raise InvalidQueryError("Query keywords must be non-empty")
        if self.k < 1:
            raise InvalidQueryError("Query k must be >= 1, got {}".format(self.k))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidQueryError("Query coordinates must be finite")

    @property
    def point(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class MatchResult:
    """A trajectory's (minimum) match: the witness window and its distance.

    ``s`` and ``e`` are ``None`` when ``distance`` is infinite.
    """

    traj_id: str
    s: Optional[int]
    e: Optional[int]
    distance: float = INFINITY

    @property
    def matched(self) -> bool:
        return self.distance < INFINITY

    def sort_key(self) -> Tuple[float, str]:
        return (self.distance, self.traj_id)


@dataclass
class TopKAnswer:
    """Answer to a query sorted ascending by ``(distance, traj_id)``."""

    results: List[MatchResult] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.results)

    def __iter__(self) -> Iterator[MatchResult]:
        return iter(self.results)

    def pairs(self) -> List[Tuple[str, float]]:
        """``(traj_id, distance)`` pairs, the part every algorithm must agree on."""
        return [(r.traj_id, r.distance) for r in self.results]


class TopKCollector:
    """Keeps the ``k`` best results from distinct trajectories.

    :attr:`threshold` is ``V[k]``, the k-th best distance, and stays infinite
    until ``k`` results have been admitted.
    """

    def __init__(self, k: int) -> None:
        self.k = k
        self._keys: List[Tuple[float, str]] = []
        self._results: List[MatchResult] = []

    @property
    def threshold(self) -> float:
        if len(self._results) < self.k:
            return INFINITY
        return self._results[-1].distance

    def offer(self, result: MatchResult) -> bool:
        """Admit *result* if it beats the current k-th entry; return whether it did."""
        if not result.matched:
            return False
        key = result.sort_key()
        if len(self._results) >= self.k and key >= self._keys[-1]:
            return False
        pos = bisect.bisect_left(self._keys, key)
        self._keys.insert(pos, key)
        self._results.insert(pos, result)
        if len(self._results) > self.k:
            self._keys.pop()
            self._results.pop()
        return True

    def answer(self) -> TopKAnswer:
        return TopKAnswer(list(self._results))


def _check_window(traj: Trajectory, s: int, e: int) -> None:
    if not 1 <= s <= e <= len(traj):
        raise PlaceIndexError(
            "Window ({}, {}) out of range for trajectory {!r} with {} places".format(
                s, e, traj.id, len(traj)
            )
        )


def window_union(traj: Trajectory, s: int, e: int) -> FrozenSet[int]:
    return frozenset().union(*(p.keywords for p in traj.places[s - 1 : e]))


def sub_matches(traj: Trajectory, s: int, e: int, keywords: AbstractSet[int]) -> bool:
    """Whether places ``s..e`` jointly cover every word in *keywords*."""
    if not keywords:
        raise InvalidQueryError("Keyword set must be non-empty")
    _check_window(traj, s, e)
    return keywords <= window_union(traj, s, e)


def attach_distance(point: Point, traj: Trajectory, s: int, e: int) -> float:
    """Distance from *point* to the nearer end of window ``(s, e)`` plus its path length."""
    first = traj.places[s - 1]
    last = traj.places[e - 1]
    near = min(
        math.hypot(point[0] - first.x, point[1] - first.y),
        math.hypot(point[0] - last.x, point[1] - last.y),
    )
    return near + traj.path_length(s, e)


def match_dist(query: Query, traj: Trajectory, s: int, e: int) -> float:
    """Match distance of window ``(s, e)``, or :data:`INFINITY` if it does not match."""
    if not sub_matches(traj, s, e, query.keywords):
        return INFINITY
    return attach_distance(query.point, traj, s, e)


def sorted_answer(results: Iterable[MatchResult], k: int) -> TopKAnswer:
    """The ``k`` best matched results by ``(distance, traj_id)``."""
    matched = sorted((r for r in results if r.matched), key=MatchResult.sort_key)
    return TopKAnswer(matched[:k])

