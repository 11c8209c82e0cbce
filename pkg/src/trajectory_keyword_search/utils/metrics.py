"""
Timing and memory measurements for benchmark runs.

:class:`MetricsCollector` times a code section and optionally tracks the peak
:mod:`tracemalloc` heap; :class:`BenchmarkResult` stores one or many samples
and derives summary statistics from them.
"""

import statistics
import time
import tracemalloc
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np


@dataclass
class BenchmarkResult:
    """Timing and (optionally) memory measurements of one benchmark.

    Attributes:
        name: Benchmark identifier, e.g. an algorithm name.
        elapsed_seconds: Wall-clock seconds of the run, or the mean of
            :attr:`samples` once aggregated.
        peak_memory_bytes: Peak traced heap in bytes, or ``None`` when memory
            tracking was off.
        extra: Additional metadata such as work counters.
        samples: Individual durations after :meth:`aggregate`.
    """

    name: str
    elapsed_seconds: float
    peak_memory_bytes: Optional[int] = None
    extra: Dict[str, Any] = field(default_factory=dict)
    samples: List[float] = field(default_factory=list, repr=False)

    @property
    def runs(self) -> int:
        return len(self.samples) or 1

    def _values(self) -> List[float]:
        return self.samples or [self.elapsed_seconds]

    @property
    def mean_seconds(self) -> float:
        return statistics.mean(self._values())

    @property
    def median_seconds(self) -> float:
        return statistics.median(self._values())

    @property
    def p95_seconds(self) -> float:
        """95th percentile of the samples, linear interpolation."""
        return float(np.percentile(self._values(), 95))

    @property
    def stdev_seconds(self) -> Optional[float]:
        """Standard deviation, or ``None`` for a single run."""
        if len(self.samples) > 1:
            return statistics.stdev(self.samples)
        return None

    @property
    def min_seconds(self) -> float:
        return min(self._values())

    @property
    def max_seconds(self) -> float:
        return max(self._values())

    @classmethod
    def aggregate(
        cls,
        results: "List[BenchmarkResult]",
        name: Optional[str] = None,
        summed: Sequence[str] = (),
    ) -> "BenchmarkResult":
        """Combine single-run results into one.

        Extras named in *summed* are added up; other extras come from the
        first result that has them.

        Raises:
            ValueError: If *results* is empty.
        """
        if not results:
            raise ValueError("Cannot aggregate an empty list of results.")
        samples = [s for r in results for s in (r.samples or [r.elapsed_seconds])]
        peak_mem = max(
            (r.peak_memory_bytes for r in results if r.peak_memory_bytes is not None),
            default=None,
        )
        extra: Dict[str, Any] = {}
        for r in results:
            for key, value in r.extra.items():
                if key in summed and key in extra:
                    extra[key] += value
                else:
                    extra.setdefault(key, value)
        return cls(
            name=name or results[0].name,
            elapsed_seconds=statistics.mean(samples),
            peak_memory_bytes=peak_mem,
            extra=extra,
            samples=samples,
        )

    def __str__(self) -> str:
        parts = [
            "[{}]".format(self.name),
            "mean={:.3f}ms".format(self.mean_seconds * 1000),
        ]
        if self.runs > 1:
            parts.append("runs={}".format(self.runs))
            parts.append("median={:.3f}ms".format(self.median_seconds * 1000))
            parts.append("p95={:.3f}ms".format(self.p95_seconds * 1000))
        if self.peak_memory_bytes is not None:
            parts.append("peak_mem={:.1f}KB".format(self.peak_memory_bytes / 1024))
        return " ".join(parts)


class MetricsCollector:
    """Collects wall-clock timing and optionally tracemalloc memory statistics.

    Usage::

        collector = MetricsCollector(track_memory=True)
        collector.start()
        top_k(query, index)
        result = collector.stop("ie")
    """

    def __init__(self, track_memory: bool = False) -> None:
        self._track_memory = track_memory
        self._start_time: Optional[float] = None

    def start(self) -> None:
        if self._track_memory:
            tracemalloc.start()
        self._start_time = time.perf_counter()

    def stop(self, name: str) -> BenchmarkResult:
        """Stop timing and return a :class:`BenchmarkResult`.

        Raises:
            RuntimeError: If :meth:`start` was not called before :meth:`stop`.
        """
        if self._start_time is None:
            raise RuntimeError("MetricsCollector.stop() called before start().")
        elapsed = time.perf_counter() - self._start_time
        self._start_time = None

        peak_memory: Optional[int] = None
        if self._track_memory:
            _, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
            peak_memory = peak

        return BenchmarkResult(name=name, elapsed_seconds=elapsed, peak_memory_bytes=peak_memory)
