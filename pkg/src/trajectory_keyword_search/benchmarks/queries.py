"""
Query workload benchmark comparing the search algorithms on one index.

Every algorithm answers every query :attr:`~BaseBenchmark.iterations` times.
Answers are reduced to a digest of their ``(traj_id, distance)`` pairs; when
two algorithms produce different digests for the same query the benchmark
raises :class:`~trajectory_keyword_search.errors.ResultMismatchError`
instead of reporting timings.

Example::

    bench = QueryBenchmark(index, queries, algorithms=["ie", "if"], iterations=3)
    results = bench.run()
    for row in bench.rows:
        print(row.algorithm, row.query, row.mean_seconds)
"""

import functools
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from trajectory_keyword_search.config import SearchConfig
from trajectory_keyword_search.errors import ResultMismatchError
from trajectory_keyword_search.index.bck import BckIndex
from trajectory_keyword_search.model import Query, TopKAnswer
from trajectory_keyword_search.search.baselines import InvertedFile, if_top_k, irt_top_k, rt_top_k
from trajectory_keyword_search.search.brute import brute_top_k
from trajectory_keyword_search.search.engine import QueryStats, top_k
from trajectory_keyword_search.search.rtree import RTree, build_ir_tree, build_trajectory_rtree
from trajectory_keyword_search.benchmarks.base import BaseBenchmark
from trajectory_keyword_search.utils.metrics import BenchmarkResult, MetricsCollector

logger = logging.getLogger(__name__)

ALGORITHMS = ("ie", "if", "rt", "irt", "brute")

STAT_KEYS = tuple(QueryStats().as_dict())


def answer_digest(answer: TopKAnswer) -> str:
    """Digest of the ``(traj_id, distance)`` pairs of *answer*."""
    text = "\n".join("{}\t{!r}".format(t, d) for t, d in answer.pairs())
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class SearchAlgorithms:
    """Runs any algorithm in :data:`ALGORITHMS` against one index.

    The inverted file and the trees are built on first use.
    """

    def __init__(self, index: BckIndex, config: Optional[SearchConfig] = None) -> None:
        self.index = index
        self.config = config or SearchConfig()
        self.trajectories = index.trajectories
        self._inverted_file: Optional[InvertedFile] = None
        self._rtree: Optional[RTree] = None
        self._ir_tree: Optional[RTree] = None

    def prepare(self, algorithm: str) -> None:
        if algorithm not in ALGORITHMS:
            raise ValueError(
                "Unknown algorithm {!r}; choose from {}".format(algorithm, ", ".join(ALGORITHMS))
            )
        if algorithm == "if" and self._inverted_file is None:
            self._inverted_file = InvertedFile.from_trajectories(self.trajectories)
        elif algorithm == "rt" and self._rtree is None:
            self._rtree = build_trajectory_rtree(self.trajectories, self.config.rtree_fanout)
        elif algorithm == "irt" and self._ir_tree is None:
            self._ir_tree = build_ir_tree(self.trajectories, self.config.rtree_fanout)

    def run(self, algorithm: str, query: Query, stats: Optional[QueryStats] = None) -> TopKAnswer:
        self.prepare(algorithm)
        if algorithm == "ie":
            return top_k(query, self.index, self.config, stats)
        if algorithm == "if":
            return if_top_k(query, self._inverted_file, self.trajectories, stats)
        if algorithm == "rt":
            return rt_top_k(query, self._rtree, self.trajectories, stats)
        if algorithm == "irt":
            return irt_top_k(query, self._ir_tree, self.trajectories, stats)
        return brute_top_k(query, self.trajectories, stats=stats)


@dataclass
class QueryRun:
    """Measurements of one algorithm on one query."""

    algorithm: str
    query: int
    samples: List[float]
    digest: str
    results: int
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def mean_seconds(self) -> float:
        return sum(self.samples) / len(self.samples)

    def as_dict(self) -> Dict[str, object]:
        return {
            "algorithm": self.algorithm,
            "query": self.query,
            "mean_ms": round(self.mean_seconds * 1000, 6),
            "runs": len(self.samples),
            "results": self.results,
            "digest": self.digest,
            **self.stats,
        }


class QueryBenchmark(BaseBenchmark):
    """Times each algorithm on each query of a workload.

    Attributes:
        rows: One :class:`QueryRun` per ``(algorithm, query)``, filled by :meth:`run`.
        workers: Threads answering queries concurrently; 1 runs them in order.
    """

    def __init__(
        self,
        index: BckIndex,
        queries: Sequence[Query],
        algorithms: Sequence[str] = ALGORITHMS,
        iterations: int = 1,
        workers: int = 1,
        config: Optional[SearchConfig] = None,
    ) -> None:
        super().__init__(iterations=iterations)
        self.queries = list(queries)
        self.algorithms = list(algorithms)
        self.workers = max(workers, 1)
        self.search = SearchAlgorithms(index, config)
        self.rows: List[QueryRun] = []

    # ------------------------------------------------------------------
    # BaseBenchmark interface
    # ------------------------------------------------------------------

    def setup(self) -> None:
        """Build the auxiliary structures of every selected algorithm."""
        for algorithm in self.algorithms:
            collector = MetricsCollector()
            collector.start()
            self.search.prepare(algorithm)
            result = collector.stop("prepare " + algorithm)
            logger.info("Prepared %s in %.3f s", algorithm, result.elapsed_seconds)

    def teardown(self) -> None:
        pass

    def run(self) -> Dict[str, BenchmarkResult]:
        """Answer the workload with every algorithm and cross-check the answers."""
        try:
            self.setup()
            self.rows = []
            positions = range(len(self.queries))
            for algorithm in self.algorithms:
                if self.workers > 1:
                    with ThreadPoolExecutor(max_workers=self.workers) as pool:
                        measure = functools.partial(self._measure, algorithm)
                        runs = list(pool.map(measure, positions))
                else:
                    runs = [self._measure(algorithm, i) for i in positions]
                self.rows.extend(runs)
                self.results[algorithm] = self._summarise(algorithm, runs)
                logger.info("%s", self.results[algorithm])
            self._check_agreement()
        finally:
            self.teardown()
        return self.results

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _measure(self, algorithm: str, position: int) -> QueryRun:
        query = self.queries[position]
        samples = []
        answer = TopKAnswer()
        stats = QueryStats()
        for repeat in range(self.iterations):
            run_stats = QueryStats()
            collector = MetricsCollector()
            collector.start()
            answer = self.search.run(algorithm, query, run_stats)
            samples.append(collector.stop(algorithm).elapsed_seconds)
            if repeat == 0:
                stats = run_stats
        return QueryRun(
            algorithm, position, samples, answer_digest(answer), len(answer), stats.as_dict()
        )

    def _summarise(self, algorithm: str, runs: List[QueryRun]) -> BenchmarkResult:
        if not runs:
            return BenchmarkResult(
                name=algorithm, elapsed_seconds=0.0, extra=dict.fromkeys(STAT_KEYS, 0)
            )
        per_query = [
            BenchmarkResult(
                name=algorithm, elapsed_seconds=0.0, extra=dict(r.stats), samples=r.samples
            )
            for r in runs
        ]
        return BenchmarkResult.aggregate(per_query, summed=STAT_KEYS)

    def _check_agreement(self) -> None:
        digests: Dict[int, Dict[str, str]] = {}
        for row in self.rows:
            digests.setdefault(row.query, {})[row.algorithm] = row.digest
        for position, by_algorithm in sorted(digests.items()):
            if len(set(by_algorithm.values())) > 1:
                raise ResultMismatchError(
                    "Algorithms disagree on query {} ({}): {}".format(
                        position,
                        self.queries[position],
                        ", ".join("{}={}".format(a, d) for a, d in sorted(by_algorithm.items())),
                    )
                )
