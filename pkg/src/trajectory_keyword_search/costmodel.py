"""
Analytical estimate of the minimum match distance of a query.

The model assumes places carry ``w`` keyword slots filled independently, and
that query word ``q`` fills a slot with probability ``pr(q)``.  From there it
derives the probability that the ``i`` places from the first place holding a
query word to the closing place jointly contain the query, the expected number
of places visited, and a distance estimate that sizes the first search window.

:func:`simulate_pr_hat_1`, :func:`simulate_jointly_contain` and
:func:`simulate_p2` draw random places under the same assumptions, and
:func:`compare_with_simulation` puts the series next to them.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from trajectory_keyword_search.grid import CellId, Grid, Rect
from trajectory_keyword_search.model import Point, Query, Trajectory

logger = logging.getLogger(__name__)

# Probabilities outside [0, 1] by less than this are rounding noise.
NOISE = 1e-12


def _snap(p: float) -> float:
    """Clamp *p* into [0, 1] when it is outside by rounding noise only."""
    if -NOISE < p < 0.0:
        return 0.0
    if 1.0 < p < 1.0 + NOISE:
        return 1.0
    return p


@dataclass(frozen=True)
class CostParams:
    """Inputs of the cost model.

    Attributes:
        K: Distinct keywords in the space.
        C: Maximum places per trajectory.
        w: Average keywords per place.
        Y: Number of trajectories.
        L: Side of the space.
        segment_length: Average distance between consecutive places.
        pr: Slot probability of each query word; ``Q`` is its length.
    """

    K: int
    C: int
    w: float
    Y: int
    L: float
    segment_length: float
    pr: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.pr, tuple):
            object.__setattr__(self, "pr", tuple(self.pr))
        if not self.pr:
            raise ValueError("CostParams needs at least one query word")
        if min(self.K, self.C, self.Y) < 1 or self.w <= 0 or self.L <= 0:
            raise ValueError("CostParams sizes must be positive: {}".format(self))
        if self.Q > self.K:
            raise ValueError("Q={} exceeds K={}".format(self.Q, self.K))
        if any(not 0.0 <= p <= 1.0 for p in self.pr):
            raise ValueError("Word probabilities must lie in [0, 1]: {}".format(self.pr))

    @property
    def Q(self) -> int:
        return len(self.pr)

    @classmethod
    def from_corpus(
        cls,
        trajectories: Sequence[Trajectory],
        query: Query,
        side: Optional[float] = None,
    ) -> "CostParams":
        """Estimate parameters from *trajectories* for the words of *query*.

        ``pr(q)`` is the share of all keyword slots of all places filled by
        ``q``.  *side* defaults to the larger extent of the data.
        """
        if not trajectories:
            raise ValueError("Cannot estimate cost parameters from an empty corpus")
        slots = 0
        places = 0
        occurrences: Dict[int, int] = {}
        segments = 0
        total_length = 0.0
        words = set()
        for traj in trajectories:
            places += len(traj)
            segments += len(traj) - 1
            total_length += traj.prefix_lengths[-1]
            for place in traj.places:
                slots += len(place.keywords)
                words |= place.keywords
                for word_id in place.keywords:
                    occurrences[word_id] = occurrences.get(word_id, 0) + 1
        if side is None:
            xs = [p.x for t in trajectories for p in t.places]
            ys = [p.y for t in trajectories for p in t.places]
            side = max(max(xs) - min(xs), max(ys) - min(ys)) or 1.0
        slots = max(slots, 1)
        return cls(
            K=max(len(words), len(query.keywords)),
            C=max(len(t) for t in trajectories),
            w=max(slots / places, 1e-9),
            Y=len(trajectories),
            L=side,
            segment_length=total_length / segments if segments else 0.0,
            pr=tuple(occurrences.get(w, 0) / slots for w in sorted(query.keywords)),
        )


def pr_hat_1(params: CostParams) -> float:
    """Probability that a single place holds every query word."""
    return _snap(math.prod(1.0 - (1.0 - p) ** params.w for p in params.pr))


def pr_joint(i: int, params: CostParams) -> float:
    """Probability that ``i`` places together hold every query word."""
    if i < 1:
        raise ValueError("i must be >= 1, got {}".format(i))
    return _snap(math.prod(1.0 - (1.0 - p) ** (i * params.w) for p in params.pr))


def p1(i: int, params: CostParams) -> float:
    """Probability that some single place among ``i`` holds every query word."""
    if i < 1:
        raise ValueError("i must be >= 1, got {}".format(i))
    h = pr_hat_1(params)
    return _snap(sum(math.comb(i, j) * h**j * (1.0 - h) ** (i - j) for j in range(1, i + 1)))


def pr_hat_series(params: CostParams, n: int) -> List[float]:
    """``[prHat(1), ..., prHat(n)]`` as the recursion gives them.

    Only rounding noise is clamped.  The subset correction over-counts
    overlapping subsets, so later terms can leave [0, 1] and then grow
    without bound; :func:`stable_terms` finds where that starts.
    """
    series: List[float] = []
    for i in range(1, n + 1):
        if i == 1:
            value = pr_hat_1(params)
        else:
            value = pr_joint(i, params) - p1(i, params) - _p2(i, params, series)
        series.append(_snap(value))
    return series


def stable_terms(series: Sequence[float]) -> int:
    """Length of the leading part of *series* that is a partial distribution.

    Every term of it lies in [0, 1] and its sum stays at most ``1 + 1e-9``.
    """
    total = 0.0
    for count, p in enumerate(series):
        total += p
        if not 0.0 <= p <= 1.0 or total > 1.0 + 1e-9:
            return count
    return len(series)


def _p2(i: int, params: CostParams, series: Sequence[float]) -> float:
    if i <= 2:
        return 0.0
    return sum(
        (math.comb(i, j) - math.comb(i - 2, j - 2))
        * series[j - 1]
        * (1.0 - pr_joint(i - j, params))
        for j in range(2, i)
    )


def p2(i: int, params: CostParams) -> float:
    """Probability that a proper subset of ``i`` places, avoiding one of the
    ends, already jointly holds the query words.  Zero for ``i <= 2``."""
    if i <= 2:
        return 0.0
    return _p2(i, params, pr_hat_series(params, i - 1))


def pr_hat_i(i: int, params: CostParams) -> float:
    """Probability that exactly ``i`` places jointly hold the query words.

    The value comes from the recursion and is not clamped, see
    :func:`pr_hat_series`.
    """
    if i < 1:
        raise ValueError("i must be >= 1, got {}".format(i))
    return pr_hat_series(params, i)[-1]


@dataclass(frozen=True)
class CostEstimate:
    """Estimate of one query.

    Attributes:
        expected_places: ``sum(i * prHat(i))`` over the stable terms.
        distance: ``approach + segment_length * expected_places``.
        approach: Estimated distance to the first place holding a query word.
        stable_terms: Terms of the series that entered the sum.
        series_terms: Terms asked for, ``C - 1``.
    """

    expected_places: float
    distance: float
    approach: float
    stable_terms: int
    series_terms: int

    @property
    def diverged(self) -> bool:
        return self.stable_terms < self.series_terms


def expected_estimate(params: CostParams) -> CostEstimate:
    """Expected places visited and estimated minimum match distance.

    ``approach`` is the estimated distance from the query to the first
    place holding a query word: ``L / sqrt(Y * C) * ceil(K / (w * Q))``.
    When the series leaves [0, 1] the sum stops before the first bad term,
    the estimate is flagged as diverged and a warning is logged.
    """
    series = pr_hat_series(params, params.C - 1)
    stable = stable_terms(series)
    if stable < len(series):
        logger.warning(
            "prHat series diverges at term %d of %d (value %.6g); "
            "expected places use the first %d terms",
            stable + 1, len(series), series[stable], stable,
        )
    expected = sum(i * p for i, p in enumerate(series[:stable], start=1))
    approach = params.L / math.sqrt(params.Y * params.C) * math.ceil(
        params.K / (params.w * params.Q)
    )
    return CostEstimate(
        expected, approach + params.segment_length * expected, approach, stable, len(series)
    )


# ----------------------------------------------------------------------
# Window cost
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class QuadCount:
    """Leaves met by a window: ``overlapping`` includes the ``enclosed`` ones."""

    overlapping: int
    enclosed: int


def quad_count_estimate(grid: Grid, center: Point, half_side: float) -> QuadCount:
    """Count the leaves a square window of *half_side* around *center* reads."""
    window = Rect.square(center, half_side)
    overlapping = enclosed = 0

    def visit(cell: CellId) -> None:
        nonlocal overlapping, enclosed
        rect = grid.cell_rect(cell)
        if not rect.intersects(window):
            return
        if grid.is_leaf(cell):
            overlapping += 1
            if window.contains_rect(rect):
                enclosed += 1
            return
        span = grid.span(cell.level + 1)
        for j in range(4):
            visit(CellId(cell.code + j * span, cell.level + 1))

    visit(CellId(0, 0))
    return QuadCount(overlapping, enclosed)


# ----------------------------------------------------------------------
# Monte Carlo
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Simulation:
    """A Monte Carlo frequency with its standard error."""

    estimate: float
    stderr: float
    samples: int

    def agrees_with(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.estimate - value) <= sigmas * self.stderr + NOISE


def _frequency(hits: np.ndarray) -> Simulation:
    n = hits.size
    p = float(hits.mean()) if n else 0.0
    return Simulation(p, math.sqrt(max(p * (1.0 - p), 1.0 / n) / n) if n else 0.0, n)


def _slot_hits(
    params: CostParams, places: int, samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Boolean ``(samples, places, Q)``: whether each place holds each query word."""
    slots = max(int(round(params.w)), 1)
    hits = np.empty((samples, places, params.Q), dtype=bool)
    for q, p in enumerate(params.pr):
        hits[:, :, q] = (rng.random((samples, places, slots)) < p).any(axis=2)
    return hits


def simulate_pr_hat_1(
    params: CostParams, samples: int = 1_000_000, seed: int = 0, batch: int = 200_000
) -> Simulation:
    """Frequency of a random place holding every query word.

    The keyword count per place is ``w`` rounded to an integer.
    """
    rng = np.random.default_rng(seed)
    parts = []
    for start in range(0, samples, batch):
        size = min(batch, samples - start)
        parts.append(_slot_hits(params, 1, size, rng)[:, 0, :].all(axis=1))
    return _frequency(np.concatenate(parts) if parts else np.empty(0, dtype=bool))


def jointly_contain(hits: np.ndarray) -> np.ndarray:
    """Whether each sample of ``(samples, i, Q)`` places jointly holds the query.

    The places must cover every word and no proper subset of them may.
    """
    counts = hits.sum(axis=1)
    covers = (counts > 0).all(axis=1)
    i = hits.shape[1]
    if i == 1:
        return covers
    redundant = np.zeros(hits.shape[0], dtype=bool)
    for place in range(i):
        redundant |= ((counts - hits[:, place, :]) > 0).all(axis=1)
    return covers & ~redundant


def simulate_jointly_contain(
    params: CostParams, i: int, samples: int = 200_000, seed: int = 0
) -> Simulation:
    """Frequency of ``i`` random places jointly holding the query words."""
    if i < 1:
        raise ValueError("i must be >= 1, got {}".format(i))
    rng = np.random.default_rng(seed)
    return _frequency(jointly_contain(_slot_hits(params, i, samples, rng)))


def _subset_covered(hits: np.ndarray) -> np.ndarray:
    """Covered by a proper subset of two or more places, and by no single place."""
    covers = hits.any(axis=1).all(axis=1)
    single = hits.all(axis=2).any(axis=1)
    return covers & ~single & ~jointly_contain(hits)


def simulate_p2(params: CostParams, i: int, samples: int = 200_000, seed: int = 0) -> Simulation:
    """Frequency of the event :func:`p2` estimates on ``i`` random places."""
    if i < 1:
        raise ValueError("i must be >= 1, got {}".format(i))
    rng = np.random.default_rng(seed)
    return _frequency(_subset_covered(_slot_hits(params, i, samples, rng)))


@dataclass(frozen=True)
class SeriesCheck:
    """Term ``i`` of the series and of ``p2`` next to their simulated frequencies."""

    i: int
    pr_hat: float
    pr_hat_simulated: Simulation
    p2: float
    p2_simulated: Simulation

    @property
    def agrees(self) -> bool:
        return self.pr_hat_simulated.agrees_with(self.pr_hat) and self.p2_simulated.agrees_with(
            self.p2
        )


def compare_with_simulation(
    params: CostParams, max_i: int, samples: int = 100_000, seed: int = 0
) -> List[SeriesCheck]:
    """Terms ``1..max_i`` of the series against Monte Carlo frequencies.

    Both events of term ``i`` are read from the same ``samples`` draws.  A gap
    beyond three standard errors is logged as a warning and left to the
    caller; nothing is raised.
    """
    series = pr_hat_series(params, max_i)
    checks = []
    for i in range(1, max_i + 1):
        hits = _slot_hits(params, i, samples, np.random.default_rng(seed + i))
        check = SeriesCheck(
            i,
            series[i - 1],
            _frequency(jointly_contain(hits)),
            _p2(i, params, series[: i - 1]),
            _frequency(_subset_covered(hits)),
        )
        if not check.agrees:
            logger.warning(
                "Term %d: prHat %.6g vs simulated %.6g +- %.2g, p2 %.6g vs simulated %.6g +- %.2g",
                i,
                check.pr_hat,
                check.pr_hat_simulated.estimate,
                check.pr_hat_simulated.stderr,
                check.p2,
                check.p2_simulated.estimate,
                check.p2_simulated.stderr,
            )
        checks.append(check)
    return checks
