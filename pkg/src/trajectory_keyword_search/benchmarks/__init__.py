"""
Benchmarks of the search algorithms.

- :mod:`~trajectory_keyword_search.benchmarks.queries` – per-query timings
  and work counters of every algorithm on one index, with answer cross-checks
- :mod:`~trajectory_keyword_search.benchmarks.scalability` – build time, peak
  memory and workload time as the corpus grows
"""

from trajectory_keyword_search.benchmarks.base import BaseBenchmark, benchmark
from trajectory_keyword_search.benchmarks.queries import (
    ALGORITHMS,
    QueryBenchmark,
    SearchAlgorithms,
)
from trajectory_keyword_search.benchmarks.scalability import ScalabilityBenchmark, run_scalability

__all__ = [
    "ALGORITHMS",
    "BaseBenchmark",
    "QueryBenchmark",
    "ScalabilityBenchmark",
    "SearchAlgorithms",
    "benchmark",
    "run_scalability",
]
