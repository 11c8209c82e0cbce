"""
Base benchmark class providing common infrastructure for all benchmark types.

Concrete benchmarks subclass :class:`BaseBenchmark`, implement
:meth:`BaseBenchmark.setup` and :meth:`BaseBenchmark.teardown`, and mark
methods with :func:`benchmark`.
"""

import abc
import functools
import logging
from collections.abc import Callable
from typing import Any, Dict, List, Optional

from trajectory_keyword_search.utils.metrics import BenchmarkResult, MetricsCollector

logger = logging.getLogger(__name__)


def benchmark(name: Optional[str] = None, track_memory: bool = False) -> Callable:
    """Decorator that marks a method as a benchmark target.

    The decorated method is timed and a :class:`BenchmarkResult` is stored
    under ``self.results[name]``.  The method body may enrich
    ``self.results[name].extra`` while it runs.

    Args:
        name: Benchmark label.  Defaults to the method's ``__name__``.
        track_memory: Populate :attr:`~BenchmarkResult.peak_memory_bytes`
            from :mod:`tracemalloc`.

    Example::

        class IndexBenchmark(BaseBenchmark):
            @benchmark("build index", track_memory=True)
            def bench_build(self):
                build_index(self.trajectories, self.grid)
    """

    def decorator(func: Callable) -> Callable:
        label = name or func.__name__

        @functools.wraps(func)
        def wrapper(self: "BaseBenchmark", *args: Any, **kwargs: Any) -> BenchmarkResult:
            placeholder = BenchmarkResult(name=label, elapsed_seconds=0.0)
            self.results[label] = placeholder

            collector = MetricsCollector(track_memory=track_memory)
            collector.start()
            try:
                func(self, *args, **kwargs)
            finally:
                result = collector.stop(label)

            result.extra.update(placeholder.extra)
            if placeholder.peak_memory_bytes is not None and result.peak_memory_bytes is None:
                result.peak_memory_bytes = placeholder.peak_memory_bytes
            self.results[label] = result
            logger.debug("%s", result)
            return result

        wrapper._is_benchmark = True  # type: ignore[attr-defined]
        wrapper._benchmark_name = label  # type: ignore[attr-defined]
        return wrapper

    return decorator


class BaseBenchmark(abc.ABC):
    """Abstract base class for all benchmark implementations.

    Attributes:
        results: Benchmark name to :class:`BenchmarkResult`, filled by :meth:`run`.
        iterations: Times each benchmark method runs during :meth:`run`.
    """

    def __init__(self, iterations: int = 1) -> None:
        if iterations < 1:
            raise ValueError("iterations must be >= 1, got {}".format(iterations))
        self.iterations = iterations
        self.results: Dict[str, BenchmarkResult] = {}

    @abc.abstractmethod
    def setup(self) -> None:
        """Prepare any state or resources needed by the benchmark."""

    @abc.abstractmethod
    def teardown(self) -> None:
        """Release any resources acquired in :meth:`setup`."""

    def benchmark_methods(self) -> List[Callable]:
        return [
            getattr(self, m)
            for m in sorted(dir(self))
            if callable(getattr(self, m)) and getattr(getattr(self, m), "_is_benchmark", False)
        ]

    def run(self) -> Dict[str, BenchmarkResult]:
        """Run every :func:`benchmark` method :attr:`iterations` times.

        Repeated runs of one method are aggregated into a single result.
        """
        try:
            self.setup()
            accumulated: Dict[str, List[BenchmarkResult]] = {}
            for _ in range(self.iterations):
                for method in self.benchmark_methods():
                    result = method()
                    accumulated.setdefault(result.name, []).append(result)

            for bench_name, run_results in accumulated.items():
                self.results[bench_name] = BenchmarkResult.aggregate(run_results)
        finally:
            self.teardown()

        return self.results
