"""
Build and workload cost of the index as the corpus grows.

:class:`ScalabilityBenchmark` measures, for one corpus:

- wall time and peak process memory of grid construction plus indexing,
  sampled by :func:`memory_profiler.memory_usage`;
- RSS growth over the build, read with :mod:`psutil`;
- wall time and traced heap peak of answering a query workload with the
  index-based search.

:func:`run_scalability` repeats it over several generated corpus sizes.
"""

import dataclasses
import logging
from typing import Dict, List, Optional, Sequence

import psutil
from memory_profiler import memory_usage

from trajectory_keyword_search.benchmarks.base import BaseBenchmark, benchmark
from trajectory_keyword_search.config import GeneratorConfig, IndexConfig, SearchConfig
from trajectory_keyword_search.grid import Rect, build_grid
from trajectory_keyword_search.index.bck import BckIndex, build_index
from trajectory_keyword_search.ingest.corpus import Corpus
from trajectory_keyword_search.ingest.synthetic import (
    WorkloadSpec,
    generate_corpus,
    generate_queries,
)
from trajectory_keyword_search.search.engine import QueryStats, top_k
from trajectory_keyword_search.utils.metrics import BenchmarkResult

logger = logging.getLogger(__name__)


def _peak_mib(sample) -> float:
    # memory_profiler returns a bare float in newer releases and a list in older ones.
    if isinstance(sample, (list, tuple)):
        return float(max(sample)) if sample else 0.0
    return float(sample)


class ScalabilityBenchmark(BaseBenchmark):
    """Index build and workload timings for one corpus.

    Attributes:
        corpus: Trajectories to index.
        workload: Queries to answer after the build.
        index_config: Grid and word policy used for the build.
    """

    def __init__(
        self,
        corpus: Corpus,
        workload: WorkloadSpec,
        index_config: Optional[IndexConfig] = None,
        search_config: Optional[SearchConfig] = None,
        iterations: int = 1,
    ) -> None:
        super().__init__(iterations=iterations)
        self.corpus = corpus
        self.workload = workload
        self.index_config = index_config or IndexConfig()
        self.search_config = search_config or SearchConfig()
        self.index: Optional[BckIndex] = None
        self.queries = []

    # ------------------------------------------------------------------
    # BaseBenchmark interface
    # ------------------------------------------------------------------

    def setup(self) -> None:
        self.queries = generate_queries(self.corpus.trajectories, self.workload)

    def teardown(self) -> None:
        self.index = None

    # ------------------------------------------------------------------
    # Benchmark methods
    # ------------------------------------------------------------------

    def _build(self) -> BckIndex:
        grid_config = self.index_config.grid
        bounds = Rect(*grid_config.bounds) if grid_config.bounds else None
        grid = build_grid(
            self.corpus.trajectories, grid_config.segment_limit, grid_config.max_level, bounds
        )
        return build_index(
            self.corpus.trajectories, grid, self.corpus.vocabulary, self.index_config.word_policy
        )

    @benchmark("build index")
    def bench_build(self) -> None:
        """Build grid and index, sampling peak memory and RSS growth."""
        proc = psutil.Process()
        rss_before = proc.memory_info().rss
        peak, index = memory_usage(
            (self._build, (), {}), max_usage=True, retval=True, interval=0.05
        )
        rss_after = proc.memory_info().rss
        self.index = index
        extra = self.results["build index"].extra
        extra["trajectories"] = len(self.corpus)
        extra["peak_memory_mib"] = round(_peak_mib(peak), 3)
        extra["rss_growth_bytes"] = max(0, rss_after - rss_before)
        extra["leaves"] = len(index.grid)
        extra["component1_entries"] = len(index.component1)

    @benchmark("run workload", track_memory=True)
    def bench_workload(self) -> None:
        """Answer the workload with the index-based search, tracing the heap peak."""
        if self.index is None:
            self.index = self._build()
        stats = QueryStats()
        for query in self.queries:
            top_k(query, self.index, self.search_config, stats)
        extra = self.results["run workload"].extra
        extra["trajectories"] = len(self.corpus)
        extra["queries"] = len(self.queries)
        extra.update(stats.as_dict())


def run_scalability(
    sizes: Sequence[int],
    generator: GeneratorConfig,
    workload: WorkloadSpec,
    index_config: Optional[IndexConfig] = None,
    iterations: int = 1,
) -> Dict[str, BenchmarkResult]:
    """Run :class:`ScalabilityBenchmark` on generated corpora of each size.

    Result names are prefixed with the corpus size, e.g. ``"n=1000 build index"``.
    """
    results: Dict[str, BenchmarkResult] = {}
    for size in sizes:
        corpus = generate_corpus(dataclasses.replace(generator, trajectories=size))
        bench = ScalabilityBenchmark(corpus, workload, index_config, iterations=iterations)
        for name, result in bench.run().items():
            label = "n={} {}".format(size, name)
            results[label] = dataclasses.replace(result, name=label)
        logger.info("Scalability run for %d trajectories done", size)
    return results


def sizes_from(text: str) -> List[int]:
    """Parse a comma separated list of corpus sizes."""
    sizes = [int(part) for part in text.split(",") if part.strip()]
    if not sizes or min(sizes) < 1:
        raise ValueError("Corpus sizes must be positive integers, got {!r}".format(text))
    return sizes
