"""
Command-line interface for building, querying and benchmarking trajectory indexes.

Usage::

    # Generate a synthetic corpus and workload, then index the corpus
    tksearch generate --out corpus.jsonl --workload-out queries.jsonl
    tksearch build --input corpus.jsonl --out corpus.bck

    # Top-3 trajectories near (120, 45) covering "museum" and "cafe"
    tksearch query --index corpus.bck --x 120 --y 45 --kw museum cafe --k 3

    # Compare every algorithm on the workload, JSON output
    tksearch bench --index corpus.bck --workload queries.jsonl --format json

    # Randomised oracle checks
    tksearch validate --n 100 --seed 7

Exit codes: 0 success, 1 usage error, 2 data error, 3 validation failure.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from trajectory_keyword_search.config import (
    DEFAULT_MAX_LEVEL,
    DEFAULT_RTREE_FANOUT,
    DEFAULT_SEGMENT_LIMIT,
    GeneratorConfig,
    GridConfig,
    IndexConfig,
    SearchConfig,
    WindowMode,
    WordPolicy,
)
from trajectory_keyword_search.errors import (
    CorpusFormatError,
    InvalidQueryError,
    ResultMismatchError,
    SnapshotError,
    ValidationFailure,
    WorkloadError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VALIDATION = 3

logger = logging.getLogger(__name__)

# Attributes every LogRecord has; anything else came in through ``extra``.
_RECORD_ATTRS = frozenset(logging.makeLogRecord({}).__dict__) | {"message", "asctime"}


class JsonFormatter(logging.Formatter):
    """One JSON object per record with ``level``, ``logger``, ``message`` and extras."""

    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key, value in record.__dict__.items():
            if key not in _RECORD_ATTRS:
                payload[key] = value
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str)


def _configure_logging(verbosity: int, log_format: str) -> None:
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbosity, 2)]
    handler = logging.StreamHandler(sys.stderr)
    if log_format == "json":
        handler.setFormatter(JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tksearch",
        description="Top-k spatial keyword search over trajectories",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log more; repeat for debug output.",
    )
    parser.add_argument(
        "--log-format",
        choices=["text", "json"],
        default="text",
        help="Format of log records on stderr (default: text).",
    )
    sub = parser.add_subparsers(dest="command")

    # --- build ---
    build = sub.add_parser("build", help="Index a corpus file into a snapshot.")
    build.add_argument("--input", metavar="PATH", required=True, help="Corpus JSON lines file.")
    build.add_argument("--out", metavar="PATH", required=True, help="Snapshot to write.")
    build.add_argument(
        "--segments-per-cell",
        metavar="N",
        type=int,
        default=DEFAULT_SEGMENT_LIMIT,
        help="Split a cell while it holds more places (default: {}).".format(DEFAULT_SEGMENT_LIMIT),
    )
    build.add_argument(
        "--max-level",
        metavar="M",
        type=int,
        default=DEFAULT_MAX_LEVEL,
        help="Finest quadtree level (default: {}).".format(DEFAULT_MAX_LEVEL),
    )
    build.add_argument(
        "--word-policy",
        choices=[p.value for p in WordPolicy],
        default=WordPolicy.NEIGHBOR_UNION.value,
        help="Words associated with each fragment (default: neighbor-union).",
    )

    # --- query ---
    query = sub.add_parser("query", help="Answer one top-k query.")
    query.add_argument("--index", metavar="PATH", required=True, help="Snapshot to search.")
    query.add_argument("--x", type=float, required=True)
    query.add_argument("--y", type=float, required=True)
    query.add_argument("--kw", metavar="WORD", nargs="+", required=True, help="Query keywords.")
    query.add_argument("--k", type=int, default=1, help="Number of results (default: 1).")
    query.add_argument(
        "--algo",
        default="ie",
        help="Search algorithm: ie, if, rt, irt or brute (default: ie).",
    )
    _add_search_options(query)

    # --- range ---
    range_parser = sub.add_parser(
        "range", help="Trajectories whose places inside a window cover the keywords."
    )
    range_parser.add_argument("--index", metavar="PATH", required=True)
    range_parser.add_argument(
        "--window",
        metavar=("MIN_X", "MIN_Y", "MAX_X", "MAX_Y"),
        type=float,
        nargs=4,
        required=True,
    )
    range_parser.add_argument("--kw", metavar="WORD", nargs="+", required=True)

    # --- insert ---
    insert = sub.add_parser("insert", help="Add the trajectories of a corpus file to a snapshot.")
    insert.add_argument("--index", metavar="PATH", required=True)
    insert.add_argument("--input", metavar="PATH", required=True)
    insert.add_argument(
        "--out", metavar="PATH", default=None, help="Snapshot to write (default: --index)."
    )

    # --- bench ---
    bench = sub.add_parser("bench", help="Time the search algorithms.")
    bench.add_argument("--index", metavar="PATH", help="Snapshot to search.")
    bench.add_argument("--workload", metavar="PATH", help="Workload JSON lines file.")
    bench.add_argument(
        "--algos",
        default="ie,if,rt,irt,brute",
        help="Comma separated algorithms (default: all).",
    )
    bench.add_argument(
        "--repeat",
        metavar="N",
        type=int,
        default=1,
        help="Runs per query and algorithm (default: 1).",
    )
    bench.add_argument(
        "--workers", metavar="N", type=int, default=1, help="Threads answering queries."
    )
    bench.add_argument(
        "--format",
        choices=["console", "json"],
        default="console",
        help="Output format (default: console).",
    )
    bench.add_argument(
        "--scalability",
        action="store_true",
        help="Measure index build and workload time on generated corpora instead.",
    )
    bench.add_argument(
        "--sizes",
        default="1000,2000,4000",
        help="Corpus sizes for --scalability (default: 1000,2000,4000).",
    )
    bench.add_argument("--seed", type=int, default=0, help="Generator seed for --scalability.")
    _add_search_options(bench)

    # --- generate ---
    generate = sub.add_parser("generate", help="Write a synthetic corpus and workload.")
    generate.add_argument("--out", metavar="PATH", required=True, help="Corpus file to write.")
    generate.add_argument("--workload-out", metavar="PATH", help="Workload file to write.")
    generate.add_argument("--trajectories", type=int, default=GeneratorConfig.trajectories)
    generate.add_argument("--vocabulary", type=int, default=GeneratorConfig.vocabulary_size)
    generate.add_argument("--clustering", type=float, default=GeneratorConfig.clustering)
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--queries", type=int, default=50, help="Workload size (default: 50).")
    generate.add_argument("--keywords-per-query", type=int, default=3)
    generate.add_argument("--k", type=int, default=10)

    # --- validate ---
    validate = sub.add_parser("validate", help="Run the randomised oracle checks.")
    validate.add_argument("--n", type=int, default=100, help="Instances per check (default: 100).")
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument(
        "--reproducer",
        metavar="PATH",
        default=None,
        help="Write the reproducer of a failure here as JSON (default: stdout).",
    )
    validate.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    # --- estimate ---
    estimate = sub.add_parser("estimate", help="Compare the cost model with measured answers.")
    estimate.add_argument("--index", metavar="PATH", required=True)
    estimate.add_argument("--workload", metavar="PATH", required=True)

    return parser


def _add_search_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--window-mode",
        choices=[m.value for m in WindowMode],
        default=WindowMode.CUMULATIVE.value,
        help="Candidate retrieval region per expansion (default: cumulative).",
    )
    parser.add_argument(
        "--fanout",
        type=int,
        default=DEFAULT_RTREE_FANOUT,
        help="R-tree node capacity (default: {}).".format(DEFAULT_RTREE_FANOUT),
    )


def _search_config(args: argparse.Namespace) -> SearchConfig:
    return SearchConfig(window_mode=WindowMode(args.window_mode), rtree_fanout=args.fanout)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def _cmd_build(args: argparse.Namespace) -> None:
    from trajectory_keyword_search.grid import build_grid
    from trajectory_keyword_search.index import build_index, save_snapshot
    from trajectory_keyword_search.ingest import load_corpus

    try:
        grid_config = GridConfig(segment_limit=args.segments_per_cell, max_level=args.max_level)
    except ValueError as exc:
        raise InvalidQueryError(str(exc)) from exc
    config = IndexConfig(grid=grid_config, word_policy=WordPolicy(args.word_policy))
    corpus = load_corpus(args.input)
    grid = build_grid(corpus.trajectories, config.grid.segment_limit, config.grid.max_level)
    index = build_index(corpus.trajectories, grid, corpus.vocabulary, config.word_policy)
    save_snapshot(index, args.out)
    _print_stats(index)


def _print_stats(index) -> None:
    for key, value in index.stats().as_dict().items():
        print("{:<20} {}".format(key, value))


def _cmd_query(args: argparse.Namespace) -> None:
    from trajectory_keyword_search.benchmarks import SearchAlgorithms
    from trajectory_keyword_search.index import load_snapshot
    from trajectory_keyword_search.ingest import encode_query

    algorithms = _algorithms(args.algo)
    if len(algorithms) != 1:
        raise InvalidQueryError(
            "--algo takes one algorithm, got {}; use bench --algos to compare".format(args.algo)
        )
    algorithm = algorithms[0]
    index = load_snapshot(args.index)
    query = encode_query(index.vocabulary, args.x, args.y, args.kw, args.k)
    answer = SearchAlgorithms(index, _search_config(args)).run(algorithm, query)
    for rank, result in enumerate(answer, start=1):
        print(
            "{} {} {} {} {:.6f}".format(rank, result.traj_id, result.s, result.e, result.distance)
        )


def _algorithms(text: str) -> List[str]:
    from trajectory_keyword_search.benchmarks import ALGORITHMS

    names = [name.strip().lower() for name in text.split(",") if name.strip()]
    unknown = [name for name in names if name not in ALGORITHMS]
    if not names or unknown:
        raise InvalidQueryError(
            "Unknown algorithm {}; choose from {}".format(
                ", ".join(repr(n) for n in unknown) or "''", ", ".join(ALGORITHMS)
            )
        )
    return names


def _cmd_range(args: argparse.Namespace) -> None:
    from trajectory_keyword_search.grid import Rect
    from trajectory_keyword_search.index import load_snapshot
    from trajectory_keyword_search.search import range_keyword_query

    min_x, min_y, max_x, max_y = args.window
    if min_x > max_x or min_y > max_y:
        raise InvalidQueryError("Window minimum exceeds its maximum: {}".format(args.window))
    index = load_snapshot(args.index)
    words, unknown = index.vocabulary.lookup(w.lower() for w in args.kw)
    if unknown:
        logger.info("Words not in the vocabulary: %s", ", ".join(unknown))
        return
    for traj_id in range_keyword_query(index, Rect(min_x, min_y, max_x, max_y), words):
        print(traj_id)


def _cmd_insert(args: argparse.Namespace) -> None:
    from trajectory_keyword_search.index import load_snapshot, save_snapshot
    from trajectory_keyword_search.ingest import load_corpus
    from trajectory_keyword_search.model import Place, Trajectory

    index = load_snapshot(args.index)
    corpus = load_corpus(args.input)
    for traj in corpus.trajectories:
        places = tuple(
            Place(p.x, p.y, index.vocabulary.encode(corpus.vocabulary.word(w) for w in p.keywords))
            for p in traj.places
        )
        try:
            index.insert_trajectory(Trajectory(traj.id, places))
        except ValueError as exc:
            raise CorpusFormatError(str(exc), args.input) from exc
    save_snapshot(index, args.out or args.index)
    _print_stats(index)


def _cmd_bench(args: argparse.Namespace) -> None:
    from trajectory_keyword_search.utils.reporting import ConsoleReporter, JsonReporter

    reporter = JsonReporter() if args.format == "json" else ConsoleReporter()
    if args.scalability:
        from trajectory_keyword_search.benchmarks.scalability import run_scalability, sizes_from
        from trajectory_keyword_search.ingest import WorkloadSpec

        try:
            sizes = sizes_from(args.sizes)
        except ValueError as exc:
            raise InvalidQueryError(str(exc)) from exc
        results = run_scalability(
            sizes,
            GeneratorConfig(seed=args.seed),
            WorkloadSpec(seed=args.seed),
            iterations=args.repeat,
        )
        reporter.report(results)
        return

    from trajectory_keyword_search.benchmarks import QueryBenchmark
    from trajectory_keyword_search.index import load_snapshot
    from trajectory_keyword_search.ingest import load_workload

    if not args.index or not args.workload:
        raise InvalidQueryError("bench needs --index and --workload unless --scalability is given")
    if args.repeat < 1:
        raise InvalidQueryError("--repeat must be >= 1, got {}".format(args.repeat))
    algorithms = _algorithms(args.algos)
    index = load_snapshot(args.index)
    queries = load_workload(args.workload, index.vocabulary)
    bench = QueryBenchmark(
        index,
        queries,
        algorithms=algorithms,
        iterations=args.repeat,
        workers=args.workers,
        config=_search_config(args),
    )
    results = bench.run()
    reporter.report(results, [row.as_dict() for row in bench.rows])


def _cmd_generate(args: argparse.Namespace) -> None:
    from trajectory_keyword_search.ingest import (
        WorkloadSpec,
        generate_corpus,
        generate_queries,
        save_corpus,
        save_workload,
    )

    try:
        config = GeneratorConfig(
            trajectories=args.trajectories,
            vocabulary_size=args.vocabulary,
            clustering=args.clustering,
            seed=args.seed,
        )
        corpus = generate_corpus(config)
    except ValueError as exc:
        raise InvalidQueryError(str(exc)) from exc
    save_corpus(args.out, corpus.trajectories, corpus.vocabulary)
    if args.workload_out:
        spec = WorkloadSpec(
            query_count=args.queries,
            keywords_per_query=args.keywords_per_query,
            k=args.k,
            seed=args.seed,
        )
        queries = generate_queries(corpus.trajectories, spec)
        save_workload(args.workload_out, queries, corpus.vocabulary)


def _cmd_validate(args: argparse.Namespace) -> None:
    from trajectory_keyword_search.validation import run_validation

    if args.n < 0:
        raise InvalidQueryError("--n must be >= 0, got {}".format(args.n))
    try:
        report = run_validation(args.n, args.seed, inject_fault=args.inject_fault)
    except ValidationFailure as exc:
        payload = json.dumps({"check": exc.check, "message": str(exc), **exc.reproducer}, indent=2)
        if args.reproducer:
            Path(args.reproducer).write_text(payload + "\n", encoding="utf-8")
            logger.error("Reproducer written to %s", args.reproducer)
        else:
            print(payload)
        raise
    for name, count in report.instances.items():
        print("{:<10} {} passed".format(name, count))
    print(
        "{:<10} {} of {} terms beyond 3 sigma".format(
            "simulated", len(report.simulation_gaps), report.simulated_terms
        )
    )
    for gap in report.simulation_gaps:
        logger.info("Cost model gap: %s", json.dumps(gap, sort_keys=True))


def _cmd_estimate(args: argparse.Namespace) -> None:
    from trajectory_keyword_search.costmodel import (
        CostParams,
        expected_estimate,
        quad_count_estimate,
    )
    from trajectory_keyword_search.index import load_snapshot
    from trajectory_keyword_search.ingest import load_workload
    from trajectory_keyword_search.search import top_k

    index = load_snapshot(args.index)
    queries = load_workload(args.workload, index.vocabulary)
    trajectories = index.trajectories
    print(
        "query expectedPlaces estDistance empirical ratio quadOverlapping quadEnclosed stableTerms"
    )
    for position, query in enumerate(queries):
        if not trajectories or any(index.vocabulary.frequency(w) == 0 for w in query.keywords):
            print("{} no-match".format(position))
            continue
        params = CostParams.from_corpus(trajectories, query, side=index.grid.side)
        estimate = expected_estimate(params)
        answer = top_k(dataclasses.replace(query, k=1), index)
        empirical = answer.results[0].distance if len(answer) else float("inf")
        ratio = estimate.distance / empirical if empirical > 0 else float("inf")
        quads = quad_count_estimate(index.grid, query.point, estimate.distance)
        print(
            "{} {:.6f} {:.6f} {:.6f} {:.6f} {} {} {}/{}".format(
                position,
                estimate.expected_places,
                estimate.distance,
                empirical,
                ratio,
                quads.overlapping,
                quads.enclosed,
                estimate.stable_terms,
                estimate.series_terms,
            )
        )


_COMMANDS = {
    "build": _cmd_build,
    "query": _cmd_query,
    "range": _cmd_range,
    "insert": _cmd_insert,
    "bench": _cmd_bench,
    "generate": _cmd_generate,
    "validate": _cmd_validate,
    "estimate": _cmd_estimate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for the ``tksearch`` CLI command.

    Returns:
        Exit code: 0 success, 1 usage error, 2 data error, 3 validation failure.
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    command = _COMMANDS.get(args.command)
    if command is None:
        parser.print_help()
        return EXIT_USAGE
    _configure_logging(args.verbose, args.log_format)

    try:
        command(args)
    except (ValidationFailure, ResultMismatchError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    except InvalidQueryError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except (CorpusFormatError, WorkloadError, SnapshotError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
