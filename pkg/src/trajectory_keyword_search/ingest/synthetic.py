"""
Seeded synthetic corpora and query workloads.

Trajectories are random walks with exponentially distributed step lengths and
a slowly turning heading.  Keywords follow a Zipf law over ranks; rank ``r``
is the word ``"w<r>"``.  ``clustering`` is the probability that a walk starts
near one of the hotspots rather than anywhere.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from trajectory_keyword_search.config import GeneratorConfig
from trajectory_keyword_search.errors import WorkloadError
from trajectory_keyword_search.ingest.corpus import Corpus
from trajectory_keyword_search.model import Place, Query, Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WorkloadSpec:
    """Shape of a generated query workload.

    Attributes:
        query_count: Number of queries.
        keywords_per_query: Distinct words per query.
        k: Result size of every query.
        spread: Query locations fall inside the source trajectory's
            bounding rectangle grown by this much on every side.
        seed: Seed of the random generator.
    """

    query_count: int = 50
    keywords_per_query: int = 3
    k: int = 10
    spread: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.query_count < 0 or self.keywords_per_query < 1 or self.k < 1:
            raise WorkloadError("Workload counts must be positive: {}".format(self))


def zipf_probabilities(size: int, exponent: float) -> np.ndarray:
    """Probability of each rank ``0..size-1`` under a Zipf law."""
    weights = 1.0 / np.arange(1, size + 1, dtype=np.float64) ** exponent
    return weights / weights.sum()


def word_name(rank: int) -> str:
    return "w{}".format(rank)


def generate_corpus(config: GeneratorConfig = GeneratorConfig()) -> Corpus:
    """Deterministic random corpus for *config*.

    Word ids are assigned in first-seen order, as :func:`load_corpus` would.
    """
    low, high = config.places_per_trajectory
    if config.trajectories < 0 or low < 1 or high < low or config.vocabulary_size < 1:
        raise ValueError("Invalid generator configuration: {}".format(config))
    rng = np.random.default_rng(config.seed)
    probabilities = zipf_probabilities(config.vocabulary_size, config.zipf_exponent)
    hotspots = rng.uniform(0.0, config.extent, size=(max(config.hotspots, 1), 2))
    spread = config.extent * 0.02

    corpus = Corpus()
    for t in range(config.trajectories):
        n = int(rng.integers(low, high + 1))
        if rng.random() < config.clustering:
            start = hotspots[rng.integers(len(hotspots))] + rng.normal(0.0, spread, 2)
        else:
            start = rng.uniform(0.0, config.extent, 2)
        headings = rng.uniform(0.0, 2 * np.pi) + np.cumsum(rng.normal(0.0, 0.5, n - 1))
        steps = rng.exponential(config.step_length, n - 1)
        xs = np.concatenate(([start[0]], start[0] + np.cumsum(steps * np.cos(headings))))
        ys = np.concatenate(([start[1]], start[1] + np.cumsum(steps * np.sin(headings))))
        xs = np.clip(xs, 0.0, config.extent)
        ys = np.clip(ys, 0.0, config.extent)

        counts = 1 + rng.poisson(max(config.keywords_per_place - 1.0, 0.0), n)
        ranks = rng.choice(config.vocabulary_size, size=int(counts.sum()), p=probabilities)
        places = []
        offset = 0
        for i in range(n):
            words = dict.fromkeys(word_name(r) for r in ranks[offset : offset + counts[i]].tolist())
            offset += int(counts[i])
            places.append(Place(float(xs[i]), float(ys[i]), corpus.vocabulary.encode(words)))
        corpus.trajectories.append(Trajectory("t{}".format(t), tuple(places)))

    logger.info(
        "Generated %d trajectories over %d words (seed %d)",
        len(corpus.trajectories), len(corpus.vocabulary), config.seed,
    )
    return corpus


def generate_queries(trajectories: Sequence[Trajectory], spec: WorkloadSpec) -> List[Query]:
    """Queries whose words all come from one randomly picked trajectory.

    Raises:
        WorkloadError: No trajectory has enough distinct words.
    """
    if spec.query_count == 0:
        return []
    eligible = [
        t for t in trajectories if len(t.keyword_union()) >= spec.keywords_per_query
    ]
    if not eligible:
        raise WorkloadError(
            "No trajectory has {} distinct keywords".format(spec.keywords_per_query)
        )
    rng = np.random.default_rng(spec.seed)
    queries = []
    for _ in range(spec.query_count):
        traj = eligible[int(rng.integers(len(eligible)))]
        words = rng.choice(
            sorted(traj.keyword_union()), size=spec.keywords_per_query, replace=False
        )
        min_x, min_y, max_x, max_y = traj.mbr()
        x = rng.uniform(min_x - spec.spread, max_x + spec.spread)
        y = rng.uniform(min_y - spec.spread, max_y + spec.spread)
        queries.append(Query(float(x), float(y), frozenset(int(w) for w in words), spec.k))
    return queries
