"""Exhaustive top-k search, the oracle every other algorithm is checked against."""

from typing import Callable, Optional, Sequence

from trajectory_keyword_search.match import naive_min_match_dist
from trajectory_keyword_search.model import (
    MatchResult,
    Query,
    TopKAnswer,
    Trajectory,
    sorted_answer,
)
from trajectory_keyword_search.search.engine import QueryStats

Scorer = Callable[[Query, Trajectory], MatchResult]


def brute_top_k(
    query: Query,
    trajectories: Sequence[Trajectory],
    scorer: Scorer = naive_min_match_dist,
    stats: Optional[QueryStats] = None,
) -> TopKAnswer:
    """Score every trajectory with *scorer* and keep the ``k`` best."""
    if stats is not None:
        stats.candidates += len(trajectories)
        stats.match_invocations += len(trajectories)
    return sorted_answer((scorer(query, t) for t in trajectories), query.k)
