"""
Robot Framework keyword library over the trajectory-keyword-search Python API.

The ``atests/`` suites use it to build small fixtures, run queries with every
algorithm and drive the randomised property loops.  Loops take a case count
from :keyword:`Case Count`, which reads the ``${TIER}`` variable: ``quick``
(the default) keeps suites fast, ``full`` runs the acceptance figures::

    python -m robot --variable TIER:full --outputdir results/atests atests/

Trajectories are written as text, one ``x,y:words`` token per place with
``+`` between words, e.g. ``0,0:a 1,0:b 2,0:b+c``.  Words are mapped to ids
through a vocabulary shared by the whole suite.

Usage in a ``.robot`` file::

    *** Settings ***
    Library    ../resources/SearchLibrary.py

    *** Test Cases ***
    Nearest window wins
        ${traj}=     Trajectory    0,0:a 1,0:b 2,0:c
        ${query}=    Query    0    1    b,c
        Min Match Distance Should Be    ${query}    ${traj}    2.414214
"""

import dataclasses
import io
import itertools
import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from robot.api.deco import keyword, library
from robot.libraries.BuiltIn import BuiltIn
from scipy.stats import chisquare

from trajectory_keyword_search.benchmarks import QueryBenchmark, SearchAlgorithms
from trajectory_keyword_search.config import GeneratorConfig, SearchConfig, WindowMode, WordPolicy
from trajectory_keyword_search.costmodel import (
    CostParams,
    compare_with_simulation,
    expected_estimate,
    jointly_contain,
    p2,
    pr_hat_1,
    pr_hat_i,
    pr_hat_series,
    pr_joint,
    quad_count_estimate,
    simulate_jointly_contain,
    simulate_pr_hat_1,
    stable_terms,
)
from trajectory_keyword_search.errors import SnapshotCorruptError, ValidationFailure
from trajectory_keyword_search.grid import (
    CellId,
    Grid,
    Rect,
    ZInterval,
    build_grid,
    deinterleave,
    interleave,
    interleave_array,
)
from trajectory_keyword_search.index import (
    BckIndex,
    IndexStats,
    Vocabulary,
    associate_fragment_words,
    build_index,
)
from trajectory_keyword_search.index.snapshot import dump_snapshot, parse_snapshot
from trajectory_keyword_search.ingest import (
    Corpus,
    WorkloadSpec,
    encode_query,
    generate_corpus,
    generate_queries,
    load_corpus,
    load_workload,
    save_corpus,
)
from trajectory_keyword_search.ingest.synthetic import zipf_probabilities
from trajectory_keyword_search.match import (
    MatchCounters,
    enumerate_minimum_matches,
    match_min_dist,
    naive_min_match_dist,
)
from trajectory_keyword_search.model import (
    INFINITY,
    MatchResult,
    Place,
    Query,
    TopKAnswer,
    Trajectory,
    dist,
    match_dist,
    sub_matches,
)
from trajectory_keyword_search.search import brute_top_k, range_keyword_query, top_k
from trajectory_keyword_search.search.engine import QueryStats, ctr, initial_radius
from trajectory_keyword_search.search.baselines import irt_top_k, rt_top_k
from trajectory_keyword_search.search.rtree import (
    RTree,
    build_ir_tree,
    build_rtree,
    build_trajectory_rtree,
)
from trajectory_keyword_search.utils.metrics import BenchmarkResult
from trajectory_keyword_search.utils.reporting import ConsoleReporter, JsonReporter
from trajectory_keyword_search.validation import (
    check_costmodel,
    check_grid,
    check_search,
    drop_trajectory_postings,
    random_query,
    random_trajectory,
    run_validation,
)

_TOLERANCE = 1e-6

_SEARCH_CORPUS = GeneratorConfig(
    trajectories=500,
    places_per_trajectory=(5, 30),
    vocabulary_size=40,
    keywords_per_place=2.0,
    step_length=8.0,
    extent=1000.0,
    clustering=0.6,
)


def _words(text: str) -> List[str]:
    return [w.strip().lower() for w in str(text).replace("+", ",").split(",") if w.strip()]


def _close(actual: float, expected: float) -> bool:
    if math.isinf(expected) or math.isinf(actual):
        return actual == expected
    return abs(actual - expected) <= _TOLERANCE * max(1.0, abs(expected))


def _recomputed_postings(
    grid: Grid, trajectories: Sequence[Trajectory], policy: WordPolicy
) -> Dict[Tuple[int, int], List[int]]:
    """Component 1 rebuilt from the leaf of every place."""
    postings: Dict[Tuple[int, int], Set[int]] = {}
    for ordinal, traj in enumerate(trajectories):
        runs: List[Tuple[int, Set[int]]] = []
        for place in traj.places:
            code = grid.locate(place.x, place.y).code
            if runs and runs[-1][0] == code:
                runs[-1][1].update(place.keywords)
            else:
                runs.append((code, set(place.keywords)))
        m = len(runs)
        for i, (code, _) in enumerate(runs, start=1):
            if i % 2 == 1 or policy is WordPolicy.PLAIN:
                sources = [i]
            elif policy is WordPolicy.NEIGHBOR_UNION:
                sources = [j for j in (i - 1, i, i + 1) if j <= m]
            else:
                sources = list(range(1, min(i + 1, m) + 1))
            for j in sources:
                for word_id in runs[j - 1][1]:
                    postings.setdefault((word_id, code), set()).add(ordinal)
    return {key: sorted(value) for key, value in sorted(postings.items())}


def _check_completeness(
    rng: np.random.Generator,
    grid: Grid,
    trajectories: Sequence[Trajectory],
    postings: Dict[Tuple[int, int], List[int]],
    vocabulary: int,
) -> None:
    b = grid.bounds
    words = rng.choice(vocabulary, size=int(rng.integers(1, 3)), replace=False).tolist()
    query = Query(
        float(rng.uniform(b.min_x, b.max_x)), float(rng.uniform(b.min_y, b.max_y)),
        frozenset(words), 1,
    )
    for ordinal, traj in enumerate(trajectories):
        best = match_min_dist(query, traj).distance
        if best == INFINITY:
            continue
        for word_id in query.keywords:
            if not any(
                ordinal in posting
                and grid.min_dist_to_cell(query.point, grid.cell(cell)) <= best + 1e-9
                for (w, cell), posting in postings.items()
                if w == word_id
            ):
                raise AssertionError(
                    "{} at {} is not posted under word {} in a near enough cell".format(
                        traj.id, best, word_id
                    )
                )


@library(scope="SUITE", doc_format="reST")
class SearchLibrary:
    """Keyword library for testing the trajectory-keyword-search Python API.

    Scope is ``SUITE`` so one vocabulary is shared by all tests of a suite
    file, and each suite starts with an empty one.
    """

    def __init__(self) -> None:
        self.vocabulary = Vocabulary()

    # ------------------------------------------------------------------
    # Tiers and helpers
    # ------------------------------------------------------------------

    @keyword("Case Count")
    def case_count(self, quick: int, full: int) -> int:
        """Return *full* when ``${TIER}`` is ``full``, else *quick*."""
        tier = BuiltIn().get_variable_value("${TIER}", "quick")
        return int(full) if str(tier).lower() == "full" else int(quick)

    @keyword("Python Executable")
    def python_executable(self) -> str:
        return sys.executable

    @keyword("Resource Path")
    def resource_path(self, name: str) -> str:
        """Absolute path of a file next to this library."""
        return str(Path(__file__).resolve().parent / name)

    @keyword("Should Be Close")
    def should_be_close(self, actual: float, expected: float) -> None:
        if not _close(float(actual), float(expected)):
            raise AssertionError("Expected {} but got {}".format(expected, actual))

    # ------------------------------------------------------------------
    # Model
    # ------------------------------------------------------------------

    @keyword("Trajectory")
    def trajectory(self, text: str, traj_id: str = "t") -> Trajectory:
        """Parse ``x,y:words`` tokens into a :class:`Trajectory`."""
        places = []
        for token in text.split():
            coords, _, words = token.partition(":")
            x, y = (float(v) for v in coords.split(","))
            places.append(Place(x, y, self.vocabulary.encode(_words(words))))
        return Trajectory(traj_id, tuple(places))

    @keyword("Query")
    def query(self, x: float, y: float, words: str, k: int = 1) -> Query:
        return Query(float(x), float(y), self.vocabulary.encode(_words(words)), int(k))

    @keyword("Distance Between")
    def distance_between(self, x1: float, y1: float, x2: float, y2: float) -> float:
        return dist((float(x1), float(y1)), (float(x2), float(y2)))

    @keyword("Window Sub Matches")
    def window_sub_matches(self, traj: Trajectory, s: int, e: int, words: str) -> bool:
        return sub_matches(traj, int(s), int(e), self.vocabulary.encode(_words(words)))

    @keyword("Window Match Distance")
    def window_match_distance(self, query: Query, traj: Trajectory, s: int, e: int) -> float:
        return match_dist(query, traj, int(s), int(e))

    # ------------------------------------------------------------------
    # Match kernel
    # ------------------------------------------------------------------

    @keyword("Min Match")
    def min_match(self, query: Query, traj: Trajectory, threshold: float = INFINITY) -> MatchResult:
        return match_min_dist(query, traj, float(threshold))

    @keyword("Min Match Distance Should Be")
    def min_match_distance_should_be(
        self, query: Query, traj: Trajectory, expected: float, s: int = 0, e: int = 0
    ) -> None:
        """Check the kernel distance and, when *s* is positive, its witness window.

        *expected* may be ``inf`` for trajectories without a match.
        """
        result = match_min_dist(query, traj)
        if not _close(result.distance, float(expected)):
            raise AssertionError("Expected distance {}, got {}".format(expected, result.distance))
        oracle = naive_min_match_dist(query, traj)
        if not _close(result.distance, oracle.distance):
            raise AssertionError(
                "Kernel {} disagrees with naive {}".format(result.distance, oracle.distance)
            )
        if int(s) > 0 and (result.s, result.e) != (int(s), int(e)):
            raise AssertionError(
                "Expected window ({}, {}), got ({}, {})".format(s, e, result.s, result.e)
            )

    @keyword("Minimum Matches")
    def minimum_matches(self, query: Query, traj: Trajectory) -> List[str]:
        """Minimum matching windows as ``"s,e"`` strings."""
        return ["{},{}".format(s, e) for s, e in enumerate_minimum_matches(query, traj)]

    @keyword("Match Kernel Should Agree With Naive Oracle")
    def match_kernel_should_agree(self, cases: int, seed: int = 0) -> None:
        """Random trajectories of up to 50 places over up to 8 words.

        Checks the distance against the quadratic oracle, the witness against
        the minimum match enumeration, the pruning contract under a random
        threshold and the linear bound on counter updates.
        """
        rng = np.random.default_rng(int(seed))
        for case in range(int(cases)):
            vocabulary = int(rng.integers(1, 9))
            traj = random_trajectory(rng, "r{}".format(case), vocabulary, max_places=50)
            query = random_query(rng, vocabulary)
            counters = MatchCounters()
            result = match_min_dist(query, traj, INFINITY, counters)
            oracle = naive_min_match_dist(query, traj)
            if result.distance != oracle.distance:
                raise AssertionError(
                    "Case {}: kernel {} != naive {}".format(case, result.distance, oracle.distance)
                )
            if result.matched and (result.s, result.e) not in enumerate_minimum_matches(query, traj):
                raise AssertionError("Case {}: witness is not a minimum match".format(case))
            hits = sum(len(p.keywords & query.keywords) for p in traj.places)
            if counters.counter_updates > 2 * hits or counters.places_scanned > len(traj):
                raise AssertionError(
                    "Case {}: {} counter updates for {} keyword hits".format(
                        case, counters.counter_updates, hits
                    )
                )
            threshold = float(rng.uniform(0.0, 30.0))
            pruned = match_min_dist(query, traj, threshold)
            if pruned.distance < oracle.distance:
                raise AssertionError("Case {}: pruned result undercuts the optimum".format(case))
            if oracle.distance <= threshold and pruned.distance != oracle.distance:
                raise AssertionError("Case {}: pruning lost a result within the threshold".format(case))

    @keyword("Match Kernel Should Agree Exhaustively")
    def match_kernel_should_agree_exhaustively(
        self, max_places: int, vocabulary: int, seed: int = 0
    ) -> None:
        """Every trajectory of up to *max_places* single-word places, every query word set."""
        rng = np.random.default_rng(int(seed))
        words = range(int(vocabulary))
        keyword_sets = [
            frozenset(c) for r in range(1, len(words) + 1) for c in itertools.combinations(words, r)
        ]
        for n in range(1, int(max_places) + 1):
            points = rng.uniform(0.0, 10.0, (n, 2)).tolist()
            for labels in itertools.product(words, repeat=n):
                places = tuple(Place(x, y, frozenset([w])) for (x, y), w in zip(points, labels))
                traj = Trajectory("e", places)
                for keywords in keyword_sets:
                    query = Query(0.0, 0.0, keywords, 1)
                    result = match_min_dist(query, traj)
                    oracle = naive_min_match_dist(query, traj)
                    if result.distance != oracle.distance:
                        raise AssertionError(
                            "Labels {} words {}: kernel {} != naive {}".format(
                                labels, sorted(keywords), result.distance, oracle.distance
                            )
                        )

    @keyword("Minimum Matches Should Be Minimal")
    def minimum_matches_should_be_minimal(self, cases: int, seed: int = 0) -> None:
        rng = np.random.default_rng(int(seed))
        for case in range(int(cases)):
            traj = random_trajectory(rng, "r{}".format(case), 4, max_places=20)
            query = random_query(rng, 4)
            windows = enumerate_minimum_matches(query, traj)
            for s, e in windows:
                if not sub_matches(traj, s, e, query.keywords):
                    raise AssertionError("Case {}: ({}, {}) does not match".format(case, s, e))
                for s2, e2 in windows:
                    if (s2, e2) != (s, e) and s <= s2 and e2 <= e:
                        raise AssertionError(
                            "Case {}: ({}, {}) contains ({}, {})".format(case, s, e, s2, e2)
                        )

    @keyword("Match Window Properties Should Hold")
    def match_window_properties_should_hold(self, cases: int, seed: int = 0) -> None:
        """Every window pair of random trajectories with up to 12 places.

        A window containing a matching window matches, and its match distance
        is at least the contained one's.  A matching window's distance is at
        least the distance from the query to each of its places.  The oracle
        distance is the minimum over every window and over minimum matches.
        """
        rng = np.random.default_rng(int(seed))
        for case in range(int(cases)):
            vocabulary = int(rng.integers(1, 6))
            traj = random_trajectory(rng, "r{}".format(case), vocabulary, max_places=12)
            query = random_query(rng, vocabulary)
            n = len(traj)
            windows = [(s, e) for s in range(1, n + 1) for e in range(s, n + 1)]
            distance = {w: match_dist(query, traj, *w) for w in windows}
            for (s, e), d in distance.items():
                if d == INFINITY:
                    continue
                farthest = max(dist(query.point, p.point) for p in traj.places[s - 1 : e])
                if d < farthest - 1e-9:
                    raise AssertionError(
                        "Case {}: ({}, {}) at {} is nearer than its place at {}".format(
                            case, s, e, d, farthest
                        )
                    )
                for s2 in range(1, s + 1):
                    for e2 in range(e, n + 1):
                        outer = distance[(s2, e2)]
                        if outer == INFINITY:
                            raise AssertionError(
                                "Case {}: ({}, {}) matches but ({}, {}) does not".format(
                                    case, s, e, s2, e2
                                )
                            )
                        if d > outer + 1e-9:
                            raise AssertionError(
                                "Case {}: ({}, {}) at {} exceeds containing ({}, {}) at {}".format(
                                    case, s, e, d, s2, e2, outer
                                )
                            )
            best = min(distance.values(), default=INFINITY)
            minimal = min(
                (distance[w] for w in enumerate_minimum_matches(query, traj)), default=INFINITY
            )
            oracle = naive_min_match_dist(query, traj)
            if not (_close(oracle.distance, best) and _close(minimal, best)):
                raise AssertionError(
                    "Case {}: naive {} minimum matches {} all windows {}".format(
                        case, oracle.distance, minimal, best
                    )
                )
            if oracle.matched and not _close(distance[(oracle.s, oracle.e)], best):
                raise AssertionError("Case {}: witness does not reach the minimum".format(case))

    # ------------------------------------------------------------------
    # Grid
    # ------------------------------------------------------------------

    @keyword("Interleave")
    def interleave(self, cx: int, cy: int, max_level: int = 12) -> int:
        return interleave(int(cx), int(cy), int(max_level))

    @keyword("Build Grid")
    def build_grid(
        self,
        trajectories: Sequence[Trajectory],
        segment_limit: int = 800,
        max_level: int = 12,
        bounds: Optional[str] = None,
    ) -> Grid:
        """Grid over *trajectories*; *bounds* is ``"min_x,min_y,max_x,max_y"``."""
        rect = Rect(*(float(v) for v in bounds.split(","))) if bounds else None
        return build_grid(list(trajectories), int(segment_limit), int(max_level), rect)

    @keyword("Leaf Count Should Be")
    def leaf_count_should_be(self, grid: Grid, expected: int) -> None:
        if len(grid) != int(expected):
            raise AssertionError("Expected {} leaves, got {}".format(expected, len(grid)))

    @keyword("Leaf Loads Should Respect Limit")
    def leaf_loads_should_respect_limit(
        self, grid: Grid, trajectories: Sequence[Trajectory]
    ) -> None:
        """Recount places per leaf and check the split rule on every leaf."""
        recount: Dict[int, int] = {}
        for traj in trajectories:
            for place in traj.places:
                code = grid.locate(place.x, place.y).code
                recount[code] = recount.get(code, 0) + 1
        for cell in grid.leaves:
            count = recount.get(cell.code, 0)
            if count != grid.load[cell.code]:
                raise AssertionError("Leaf {} load {} != recount {}".format(cell, grid.load[cell.code], count))
            if count > grid.segment_limit and cell.level < grid.max_level:
                raise AssertionError("Leaf {} holds {} places".format(cell, count))

    @keyword("Fragments")
    def fragments(self, grid: Grid, traj: Trajectory) -> List[str]:
        """Fragments as ``"ordinal:first-last"`` strings."""
        return [
            "{}:{}-{}".format(f.ordinal, f.first, f.last) for f in grid.fragment_trajectory(traj)
        ]

    @keyword("Window Intervals")
    def window_intervals(
        self, grid: Grid, min_x: float, min_y: float, max_x: float, max_y: float
    ) -> List[str]:
        """Code intervals of a window as ``"sid-eid"`` strings."""
        window = Rect(float(min_x), float(min_y), float(max_x), float(max_y))
        return ["{}-{}".format(i.sid, i.eid) for i in grid.window_to_intervals(window)]

    @keyword("Distance To Cell")
    def distance_to_cell(self, grid: Grid, x: float, y: float, code: int, level: int) -> float:
        return grid.min_dist_to_cell((float(x), float(y)), CellId(int(code), int(level)))

    @keyword("Grid Invariants Should Hold")
    def grid_invariants_should_hold(self, cases: int, seed: int = 0) -> None:
        rng = np.random.default_rng(int(seed))
        for _ in range(int(cases)):
            check_grid(rng)

    @keyword("Cell Distance Should Match Clamp Oracle")
    def cell_distance_should_match(self, cases: int, seed: int = 0) -> None:
        rng = np.random.default_rng(int(seed))
        grid = build_grid([], 1, 4, Rect(0.0, 0.0, 16.0, 16.0))
        for case in range(int(cases)):
            level = int(rng.integers(0, 5))
            span = grid.span(level)
            cell = CellId(int(rng.integers(0, 4**4 // span)) * span, level)
            x, y = rng.uniform(-8.0, 24.0, 2).tolist()
            rect = grid.cell_rect(cell)
            cx = min(max(x, rect.min_x), rect.max_x)
            cy = min(max(y, rect.min_y), rect.max_y)
            expected = math.hypot(x - cx, y - cy)
            actual = grid.min_dist_to_cell((x, y), cell)
            if not _close(actual, expected):
                raise AssertionError("Case {}: {} != {}".format(case, actual, expected))

    @keyword("Interleave Should Be A Bijection")
    def interleave_should_be_a_bijection(self, max_level: int = 8) -> None:
        """Every base cell of every level up to *max_level*, both code paths."""
        for level in range(int(max_level) + 1):
            side = 1 << level
            cx, cy = (a.ravel() for a in np.meshgrid(np.arange(side), np.arange(side)))
            codes = [interleave(x, y, level) for x, y in zip(cx.tolist(), cy.tolist())]
            if sorted(codes) != list(range(side * side)):
                raise AssertionError(
                    "Level {}: codes are not 0..{}".format(level, side * side - 1)
                )
            if interleave_array(cx, cy).tolist() != codes:
                raise AssertionError("Level {}: vectorised codes differ".format(level))
            for x, y, code in zip(cx.tolist(), cy.tolist(), codes):
                if deinterleave(code, level) != (x, y):
                    raise AssertionError("Level {}: code {} does not invert".format(level, code))

    @keyword("Quad Cells Should Cover Contiguous Code Ranges")
    def quad_cells_should_cover_contiguous_code_ranges(self, cases: int, seed: int = 0) -> None:
        """Each leaf's base cells, found from its rectangle, hold exactly its code range.

        The leaf code is the smallest of them, and leaves tile all base codes.
        """
        rng = np.random.default_rng(int(seed))
        for case in range(int(cases)):
            config = GeneratorConfig(
                trajectories=20, places_per_trajectory=(5, 20), vocabulary_size=5,
                clustering=0.8, seed=int(seed) + case,
            )
            max_level = int(rng.integers(1, 7))
            grid = build_grid(
                generate_corpus(config).trajectories, int(rng.integers(1, 30)), max_level
            )
            base = grid.side / grid.resolution
            covered = 0
            for cell in grid.leaves:
                rect = grid.cell_rect(cell)
                cols = range(
                    int(round((rect.min_x - grid.bounds.min_x) / base)),
                    int(round((rect.max_x - grid.bounds.min_x) / base)),
                )
                rows = range(
                    int(round((rect.min_y - grid.bounds.min_y) / base)),
                    int(round((rect.max_y - grid.bounds.min_y) / base)),
                )
                codes = sorted(interleave(x, y, max_level) for x in cols for y in rows)
                expected = grid.code_range(cell)
                if codes != list(range(expected.sid, expected.eid + 1)):
                    raise AssertionError(
                        "Case {}: leaf {} covers {} base cells, not {}-{}".format(
                            case, cell, len(codes), expected.sid, expected.eid
                        )
                    )
                if codes[0] != cell.code:
                    raise AssertionError(
                        "Case {}: leaf {} is not its smallest code".format(case, cell)
                    )
                covered += len(codes)
            if covered != grid.resolution**2:
                raise AssertionError("Case {}: leaves cover {} base cells".format(case, covered))

    @keyword("Cell Bound Should Hold For Witness Windows")
    def cell_bound_should_hold_for_witness_windows(self, cases: int, seed: int = 0) -> None:
        """A trajectory's minimum match distance is at least the distance to
        every leaf holding a place of its witness window."""
        rng = np.random.default_rng(int(seed))
        for case in range(int(cases)):
            corpus = generate_corpus(
                GeneratorConfig(
                    trajectories=30, places_per_trajectory=(5, 25), vocabulary_size=6,
                    keywords_per_place=1.5, step_length=20.0, seed=int(seed) + case,
                )
            )
            grid = build_grid(corpus.trajectories, int(rng.integers(2, 30)), 8)
            b = grid.bounds
            words = rng.choice(6, size=int(rng.integers(1, 3)), replace=False).tolist()
            x = float(rng.uniform(b.min_x, b.max_x))
            y = float(rng.uniform(b.min_y, b.max_y))
            query = Query(x, y, frozenset(words), 1)
            for traj in corpus.trajectories:
                result = match_min_dist(query, traj)
                if not result.matched:
                    continue
                for place in traj.places[result.s - 1 : result.e]:
                    cell = grid.locate(place.x, place.y)
                    bound = grid.min_dist_to_cell(query.point, cell)
                    if result.distance < bound - 1e-9:
                        raise AssertionError(
                            "Case {}: {} at {} but leaf {} is {} away".format(
                                case, traj.id, result.distance, cell, bound
                            )
                        )

    # ------------------------------------------------------------------
    # Index
    # ------------------------------------------------------------------

    @keyword("Associate Fragment Words")
    def associate_fragment_words(self, raw: str, policy: str = "neighbor-union") -> List[str]:
        """Associated words per fragment for ``|``-separated raw word lists.

        ``"a|b|c"`` gives ``["a", "a,b,c", "c"]`` under neighbour union.
        """
        sets = [self.vocabulary.encode(_words(part)) for part in raw.split("|")]
        associated = associate_fragment_words(sets, WordPolicy(policy))
        return [",".join(sorted(self.vocabulary.word(w) for w in words)) for words in associated]

    @keyword("Load Fixture Corpus")
    def load_fixture_corpus(self, path: str) -> Corpus:
        return load_corpus(path)

    @keyword("Build Index From Corpus")
    def build_index_from_corpus(
        self,
        corpus: Corpus,
        segment_limit: int = 800,
        max_level: int = 12,
        policy: str = "neighbor-union",
    ) -> BckIndex:
        grid = build_grid(corpus.trajectories, int(segment_limit), int(max_level))
        vocabulary = Vocabulary(corpus.vocabulary.words)
        return build_index(corpus.trajectories, grid, vocabulary, WordPolicy(policy))

    @keyword("Build Index From Trajectories")
    def build_index_from_trajectories(
        self, trajectories: Sequence[Trajectory], segment_limit: int = 800, max_level: int = 12
    ) -> BckIndex:
        grid = build_grid(list(trajectories), int(segment_limit), int(max_level))
        return build_index(list(trajectories), grid, Vocabulary(self.vocabulary.words))

    @keyword("Index Stats")
    def index_stats(self, index: BckIndex) -> Dict[str, Any]:
        return index.stats().as_dict()

    @keyword("Posting Ids")
    def posting_ids(self, index: BckIndex, word: str, code: int = 0) -> List[str]:
        """Trajectory ids posted under ``(word, cell)``."""
        word_id = index.vocabulary.id_of(word)
        if word_id is None:
            return []
        return [index.traj_id(o) for o in index.posting(word_id, int(code))]

    @keyword("Place Postings")
    def place_postings(self, index: BckIndex, traj_id: str, word: str) -> List[int]:
        word_id = index.vocabulary.id_of(word)
        if word_id is None:
            return []
        return index.place_postings(index.ordinal_of(traj_id), [word_id])[word_id]

    @keyword("Component 2 Should Restrict Places Exactly")
    def component2_should_restrict(self, index: BckIndex, words: str) -> None:
        word_ids = frozenset(
            w for w in (index.vocabulary.id_of(x) for x in _words(words)) if w is not None
        )
        for ordinal, traj in enumerate(index.trajectories):
            restricted = index.restricted_trajectory(ordinal, word_ids)
            if restricted != traj.restricted_to(word_ids):
                raise AssertionError("Restriction of {} differs from raw places".format(traj.id))

    @keyword("Interval Scan Should Match Full Scan")
    def interval_scan_should_match(self, cases: int, seed: int = 0) -> None:
        rng = np.random.default_rng(int(seed))
        config = dataclasses.replace(_SEARCH_CORPUS, trajectories=120, seed=int(seed))
        corpus = generate_corpus(config)
        grid = build_grid(corpus.trajectories, 20, 8)
        index = build_index(corpus.trajectories, grid, corpus.vocabulary)
        entries = list(index.component1_entries())
        top = 4**grid.max_level - 1
        for case in range(int(cases)):
            word_id = int(rng.integers(0, len(index.vocabulary) + 2))
            sid, eid = sorted(int(v) for v in rng.integers(0, top + 1, 2))
            scan = index.cells_in_interval(word_id, ZInterval(sid, eid))
            expected = [cell for w, cell, _ in entries if w == word_id and sid <= cell <= eid]
            if scan.cells != expected:
                raise AssertionError("Case {}: scan {} != full scan {}".format(case, scan.cells, expected))

    @keyword("Snapshot Round Trip Should Be Byte Identical")
    def snapshot_round_trip(self, index: BckIndex) -> BckIndex:
        data = dump_snapshot(index)
        loaded = parse_snapshot(data)
        if dump_snapshot(loaded) != data:
            raise AssertionError("Re-serialised snapshot differs")
        if loaded.stats() != index.stats():
            raise AssertionError("Stats differ: {} != {}".format(loaded.stats(), index.stats()))
        return loaded

    @keyword("Truncated Snapshot Should Be Rejected")
    def truncated_snapshot_should_be_rejected(self, index: BckIndex) -> None:
        data = dump_snapshot(index)
        for cut in (len(data) - 1, len(data) // 2, 12):
            try:
                parse_snapshot(data[:cut])
            except SnapshotCorruptError:
                continue
            raise AssertionError("Snapshot truncated to {} bytes was accepted".format(cut))

    @keyword("Incremental Inserts Should Match Rebuild")
    def incremental_inserts_should_match_rebuild(self, cases: int, seed: int = 0) -> None:
        """Index a prefix, insert the rest, compare query answers with a rebuild."""
        for case in range(int(cases)):
            config = dataclasses.replace(_SEARCH_CORPUS, trajectories=80, seed=int(seed) + case)
            corpus = generate_corpus(config)
            bounds = Rect(0.0, 0.0, config.extent, config.extent)
            head = corpus.trajectories[:20]
            grid = build_grid(head, 30, 8, bounds)
            before = len(grid)
            incremental = build_index(head, grid, Vocabulary(corpus.vocabulary.words))
            for traj in corpus.trajectories[20:]:
                incremental.insert_trajectory(traj)
            if len(incremental.grid) < before + 9:
                raise AssertionError(
                    "Case {}: {} leaves grew to {}, fewer than three splits".format(
                        case, before, len(incremental.grid)
                    )
                )
            fresh = build_index(
                corpus.trajectories,
                build_grid(corpus.trajectories, 30, 8, bounds),
                Vocabulary(corpus.vocabulary.words),
            )
            if incremental.grid.leaves != fresh.grid.leaves:
                raise AssertionError("Case {}: leaves differ from a fresh build".format(case))
            spec = WorkloadSpec(query_count=10, keywords_per_query=2, k=5, seed=case)
            for query in generate_queries(corpus.trajectories, spec):
                a = top_k(query, incremental).pairs()
                b = top_k(query, fresh).pairs()
                if a != b:
                    raise AssertionError("Case {}: {} != {} for {}".format(case, a, b, query))

    @keyword("Index Should Hold Its Invariants")
    def index_should_hold_its_invariants(self, cases: int, seed: int = 0) -> None:
        """Random small corpora indexed under every word policy.

        Component 1 must equal postings recomputed from place locations, keep
        its keys and postings strictly ascending, and post every matching
        trajectory under each query word in some cell no farther than its
        minimum match distance.  Two builds must serialise to the same bytes.
        """
        rng = np.random.default_rng(int(seed))
        for case in range(int(cases)):
            config = dataclasses.replace(
                _SEARCH_CORPUS, trajectories=40, vocabulary_size=10, seed=int(seed) + case
            )
            corpus = generate_corpus(config)
            trajectories = corpus.trajectories
            limit = int(rng.integers(2, 60))
            for policy in WordPolicy:
                grid = build_grid(trajectories, limit, 8)
                vocabulary = Vocabulary(corpus.vocabulary.words)
                index = build_index(trajectories, grid, vocabulary, policy)
                entries = list(index.component1_entries())
                keys = [(w, cell) for w, cell, _ in entries]
                if any(a >= b for a, b in zip(keys, keys[1:])):
                    raise AssertionError("Case {}: Component 1 keys out of order".format(case))
                for w, cell, posting in entries:
                    if any(a >= b for a, b in zip(posting, posting[1:])):
                        raise AssertionError(
                            "Case {}: posting ({}, {}) is {}".format(case, w, cell, posting)
                        )
                postings = {(w, cell): posting for w, cell, posting in entries}
                expected = _recomputed_postings(grid, trajectories, policy)
                if postings != expected:
                    raise AssertionError(
                        "Case {} ({}): {} keys, recomputed {}".format(
                            case, policy.value, len(postings), len(expected)
                        )
                    )
                for _ in range(5):
                    _check_completeness(
                        rng, grid, trajectories, postings, config.vocabulary_size
                    )
                again = build_index(
                    trajectories, build_grid(trajectories, limit, 8),
                    Vocabulary(corpus.vocabulary.words), policy,
                )
                if dump_snapshot(again) != dump_snapshot(index):
                    raise AssertionError("Case {} ({}): rebuild differs".format(case, policy.value))

    @keyword("Inserts Without Overflow Should Equal A Fresh Build")
    def inserts_without_overflow_should_equal_a_fresh_build(self, seed: int = 0) -> int:
        """Insert only trajectories that leave every leaf within the limit and
        compare snapshot bytes with a fresh build; return how many went in."""
        config = dataclasses.replace(
            _SEARCH_CORPUS, trajectories=80, clustering=0.0, seed=int(seed)
        )
        corpus = generate_corpus(config)
        bounds = Rect(0.0, 0.0, config.extent, config.extent)
        limit = 100
        head = corpus.trajectories[:10]
        grid = build_grid(head, limit, 8, bounds)
        incremental = build_index(head, grid, Vocabulary(corpus.vocabulary.words))
        inserted = []
        for traj in corpus.trajectories[10:]:
            codes, counts = np.unique(
                grid.leaf_codes(grid.trajectory_codes(traj)), return_counts=True
            )
            if all(grid.load[c] + n <= limit for c, n in zip(codes.tolist(), counts.tolist())):
                incremental.insert_trajectory(traj)
                inserted.append(traj)
        if not inserted:
            raise AssertionError("Every trajectory would overflow a leaf")
        everything = head + inserted
        fresh = build_index(
            everything,
            build_grid(everything, limit, 8, bounds),
            Vocabulary(corpus.vocabulary.words),
        )
        if dump_snapshot(incremental) != dump_snapshot(fresh):
            raise AssertionError(
                "Snapshot after {} inserts differs from a fresh build".format(len(inserted))
            )
        return len(inserted)

    # ------------------------------------------------------------------
    # Search
    # ------------------------------------------------------------------

    @keyword("Search")
    def search(
        self,
        index: BckIndex,
        x: float,
        y: float,
        words: str,
        k: int = 1,
        algorithm: str = "ie",
        window_mode: str = "cumulative",
    ) -> TopKAnswer:
        query = self.query_for_index(index, x, y, words, k)
        config = SearchConfig(window_mode=WindowMode(window_mode))
        return SearchAlgorithms(index, config).run(algorithm, query)

    def query_for_index(self, index: BckIndex, x: float, y: float, words: str, k: int) -> Query:
        return encode_query(index.vocabulary, float(x), float(y), _words(words), int(k))

    @keyword("Answer Lines")
    def answer_lines(self, answer: TopKAnswer) -> List[str]:
        """Result lines in ``tksearch query`` format."""
        return [
            "{} {} {} {} {:.6f}".format(rank, r.traj_id, r.s, r.e, r.distance)
            for rank, r in enumerate(answer, start=1)
        ]

    @keyword("Initial Radius")
    def initial_radius(self, k: int, area: float, trajectories: int, probability: float) -> Any:
        """Initial half-side for one query word of frequency ``probability * trajectories``."""
        stats = IndexStats(
            trajectory_count=int(trajectories),
            space_area=float(area),
            tau=0.0,
            leaf_count=1,
            component1_entries=0,
            component2_entries=0,
            segment_limit=800,
            max_level=12,
            word_policy=WordPolicy.NEIGHBOR_UNION,
            vocabulary_size=1,
        )
        count = float(probability) * int(trajectories)
        query = Query(0.0, 0.0, frozenset([0]), int(k))
        return initial_radius(query, stats, lambda w: count)

    @keyword("Candidates In Whole Space")
    def candidates_in_whole_space(self, index: BckIndex, words: str) -> List[str]:
        query = self.query_for_index(index, 0.0, 0.0, words, 1)
        intervals = index.grid.window_to_intervals(index.grid.bounds)
        return sorted(index.traj_id(o) for o in ctr(query, intervals, index))

    @keyword("Range Query")
    def range_query(
        self, index: BckIndex, min_x: float, min_y: float, max_x: float, max_y: float, words: str
    ) -> List[str]:
        known, unknown = index.vocabulary.lookup(_words(words))
        if unknown:
            return []
        window = Rect(float(min_x), float(min_y), float(max_x), float(max_y))
        return range_keyword_query(index, window, known)

    @keyword("Search Should Agree With Brute Force")
    def search_should_agree_with_brute_force(
        self,
        algorithm: str = "ie",
        queries: int = 100,
        seed: int = 0,
        policy: str = "neighbor-union",
        window_mode: str = "cumulative",
        segment_limit: int = 50,
    ) -> None:
        """Answer a generated workload with *algorithm* on a generated corpus.

        The corpus has 500 trajectories; answers must equal brute force.
        """
        corpus = generate_corpus(dataclasses.replace(_SEARCH_CORPUS, seed=int(seed)))
        grid = build_grid(corpus.trajectories, int(segment_limit), 10)
        index = build_index(corpus.trajectories, grid, corpus.vocabulary, WordPolicy(policy))
        search = SearchAlgorithms(index, SearchConfig(window_mode=WindowMode(window_mode)))
        for n_words in (1, 2, 3):
            spec = WorkloadSpec(
                query_count=max(int(queries) // 3, 1),
                keywords_per_query=n_words,
                k=10,
                seed=int(seed),
            )
            for query in generate_queries(corpus.trajectories, spec):
                expected = brute_top_k(query, corpus.trajectories).pairs()
                actual = search.run(algorithm, query).pairs()
                if actual != expected:
                    raise AssertionError(
                        "{} answered {} for {}, brute force {}".format(
                            algorithm, actual, query, expected
                        )
                    )

    @keyword("Candidates Should Match A Full Scan")
    def candidates_should_match_a_full_scan(self, cases: int, seed: int = 0) -> None:
        """Over the whole space, candidates are exactly the trajectories holding
        every query word, under each word policy, on random small corpora."""
        rng = np.random.default_rng(int(seed))
        for case in range(int(cases)):
            config = dataclasses.replace(
                _SEARCH_CORPUS, trajectories=60, vocabulary_size=12, seed=int(seed) + case
            )
            corpus = generate_corpus(config)
            grid = build_grid(corpus.trajectories, int(rng.integers(2, 40)), 8)
            intervals = grid.window_to_intervals(grid.bounds)
            for policy in WordPolicy:
                index = build_index(corpus.trajectories, grid, corpus.vocabulary, policy)
                for _ in range(5):
                    size = int(rng.integers(1, 4))
                    drawn = rng.choice(len(corpus.vocabulary), size, replace=False)
                    words = frozenset(drawn.tolist())
                    query = Query(0.0, 0.0, words, 1)
                    expected = {
                        o for o, t in enumerate(corpus.trajectories) if words <= t.keyword_union()
                    }
                    actual = ctr(query, intervals, index)
                    if actual != expected:
                        raise AssertionError(
                            "Case {} ({}): words {} gave {} candidates, full scan {}".format(
                                case, policy.value, sorted(words), len(actual), len(expected)
                            )
                        )

    @keyword("Tree Searches Should Prune Nodes")
    def tree_searches_should_prune_nodes(self, queries: int = 30, seed: int = 0) -> Dict[str, int]:
        """Nodes visited by rt and irt over a workload, against the tree sizes.

        Fails unless each algorithm visits fewer nodes in total than a full
        traversal per query would.
        """
        corpus = generate_corpus(dataclasses.replace(_SEARCH_CORPUS, seed=int(seed)))
        trajectories = corpus.trajectories
        rtree = build_trajectory_rtree(trajectories, 4)
        ir_tree = build_ir_tree(trajectories, 4)
        spec = WorkloadSpec(query_count=int(queries), keywords_per_query=2, k=5, seed=int(seed))
        workload = generate_queries(trajectories, spec)
        visited = {"rt": 0, "irt": 0}
        for query in workload:
            expected = brute_top_k(query, trajectories).pairs()
            rt_stats, irt_stats = QueryStats(), QueryStats()
            if rt_top_k(query, rtree, trajectories, rt_stats).pairs() != expected:
                raise AssertionError("rt disagrees with brute force for {}".format(query))
            if irt_top_k(query, ir_tree, trajectories, irt_stats).pairs() != expected:
                raise AssertionError("irt disagrees with brute force for {}".format(query))
            visited["rt"] += rt_stats.iterations
            visited["irt"] += irt_stats.iterations
        total = sum(1 for _ in rtree.nodes())
        full = total * len(workload)
        BuiltIn().log("Visited {} of {} nodes".format(visited, full))
        if not visited["rt"] < full or not visited["irt"] < full:
            raise AssertionError("Best-first search visited every node: {}".format(visited))
        return visited

    @keyword("Ring Search Should Stay Sound")
    def ring_search_should_stay_sound(self, queries: int = 30, seed: int = 0) -> int:
        """Answer a generated workload in ring window mode and return how many
        answers differ from brute force.

        Ring windows may miss trajectories, so answers are not compared for
        equality.  Every reported distance must be the true minimum match
        distance of its trajectory, and the ``i``-th reported distance can
        never beat the ``i``-th distance of brute force.
        """
        corpus = generate_corpus(dataclasses.replace(_SEARCH_CORPUS, seed=int(seed)))
        grid = build_grid(corpus.trajectories, 50, 10)
        index = build_index(corpus.trajectories, grid, corpus.vocabulary)
        search = SearchAlgorithms(index, SearchConfig(window_mode=WindowMode.RING))
        by_id = {t.id: t for t in corpus.trajectories}
        differing = 0
        for n_words in (1, 2, 3):
            spec = WorkloadSpec(
                query_count=max(int(queries) // 3, 1), keywords_per_query=n_words, k=10,
                seed=int(seed),
            )
            for query in generate_queries(corpus.trajectories, spec):
                expected = brute_top_k(query, corpus.trajectories)
                actual = search.run("ie", query)
                if len(actual) > len(expected):
                    raise AssertionError("Ring answer longer than brute force for {}".format(query))
                ids = [r.traj_id for r in actual]
                if len(set(ids)) != len(ids):
                    raise AssertionError("Ring answer repeats a trajectory: {}".format(ids))
                for mine, best in zip(actual.results, expected.results):
                    true = naive_min_match_dist(query, by_id[mine.traj_id]).distance
                    if not _close(mine.distance, true):
                        raise AssertionError(
                            "{} reported at {}, true distance {}".format(
                                mine.traj_id, mine.distance, true
                            )
                        )
                    if mine.distance < best.distance - _TOLERANCE:
                        raise AssertionError(
                            "Ring distance {} beats brute force {}".format(
                                mine.distance, best.distance
                            )
                        )
                if actual.pairs() != expected.pairs():
                    differing += 1
        BuiltIn().log("Ring answers differing from brute force: {}".format(differing))
        return differing

    @keyword("Search Property Checks Should Pass")
    def search_property_checks_should_pass(self, cases: int, seed: int = 0) -> None:
        """Small random corpora under random word policies, all algorithms."""
        rng = np.random.default_rng(int(seed))
        for _ in range(int(cases)):
            check_search(rng)

    @keyword("Performance Trends")
    def performance_trends(
        self, trajectories: int = 2000, queries: int = 50, seed: int = 0
    ) -> Dict[str, float]:
        """Candidate counts of ie and if on a clustered corpus.

        Fails when ie scores more candidates than if on any query, when if
        scores more candidates for a superset of keywords, or when the
        segment limit changes an answer.  Returns the share of queries where
        ie scores strictly fewer candidates and the ratio between the largest
        and smallest ie candidate totals over the segment limits.
        """
        config = GeneratorConfig(
            trajectories=int(trajectories),
            places_per_trajectory=(20, 60),
            clustering=0.9,
            seed=int(seed),
        )
        corpus = generate_corpus(config)
        workload = generate_queries(
            corpus.trajectories,
            WorkloadSpec(query_count=int(queries), keywords_per_query=2, k=10, seed=int(seed)),
        )
        answers: Dict[int, List[List[Any]]] = {}
        totals: Dict[int, int] = {}
        fewer = 0
        for limit in (400, 800, 1200):
            grid = build_grid(corpus.trajectories, limit, 12)
            search = SearchAlgorithms(build_index(corpus.trajectories, grid, corpus.vocabulary))
            answers[limit] = []
            totals[limit] = 0
            for position, query in enumerate(workload):
                ie_stats, if_stats = QueryStats(), QueryStats()
                answers[limit].append(search.run("ie", query, ie_stats).pairs())
                search.run("if", query, if_stats)
                totals[limit] += ie_stats.candidates
                if ie_stats.candidates > if_stats.candidates:
                    raise AssertionError(
                        "Query {}: ie scored {} candidates, if {}".format(
                            position, ie_stats.candidates, if_stats.candidates
                        )
                    )
                if limit == 800 and ie_stats.candidates < if_stats.candidates:
                    fewer += 1
            if answers[limit] != answers[400]:
                raise AssertionError("Segment limit {} changed the answers".format(limit))

        rng = np.random.default_rng(int(seed))
        rich = [t for t in corpus.trajectories if len(t.keyword_union()) >= 5]
        search = SearchAlgorithms(
            build_index(
                corpus.trajectories, build_grid(corpus.trajectories, 800, 12), corpus.vocabulary
            )
        )
        for _ in range(min(len(rich), int(queries))):
            traj = rich[int(rng.integers(len(rich)))]
            words = rng.permutation(sorted(traj.keyword_union()))[:5].tolist()
            previous = None
            for size in range(2, 6):
                stats = QueryStats()
                search.run("if", Query(0.0, 0.0, frozenset(words[:size]), 10), stats)
                if previous is not None and stats.candidates > previous:
                    raise AssertionError(
                        "if scored more candidates for {} than for {}".format(
                            words[:size], words[: size - 1]
                        )
                    )
                previous = stats.candidates

        ratio = max(totals.values()) / max(min(totals.values()), 1)
        share = fewer / len(workload) if workload else 0.0
        message = "ie fewer than if on {:.0%} of queries, granularity ratio {:.2f}"
        BuiltIn().log(message.format(share, ratio))
        return {"fewer_share": share, "granularity_ratio": ratio}

    # ------------------------------------------------------------------
    # Baselines
    # ------------------------------------------------------------------

    @keyword("Build R Tree")
    def build_r_tree(self, rects: int, fanout: int = 4, seed: int = 0) -> RTree:
        rng = np.random.default_rng(int(seed))
        mbrs = []
        for _ in range(int(rects)):
            x, y = rng.uniform(0.0, 100.0, 2).tolist()
            w, h = rng.uniform(0.0, 10.0, 2).tolist()
            mbrs.append(Rect(x, y, x + w, y + h))
        return build_rtree(mbrs, int(fanout))

    @keyword("R Tree Height Should Be")
    def r_tree_height_should_be(self, tree: RTree, expected: int) -> None:
        if tree.height != int(expected):
            raise AssertionError("Expected height {}, got {}".format(expected, tree.height))

    @keyword("R Tree Nodes Should Enclose Children")
    def r_tree_nodes_should_enclose_children(self, tree: RTree) -> None:
        seen = 0
        for node in tree.nodes():
            if len(node.entries) > tree.fanout:
                raise AssertionError("Node with {} entries".format(len(node.entries)))
            for entry in node.entries:
                if entry.child is not None:
                    if entry.rect != entry.child.rect:
                        raise AssertionError("Entry rectangle is not its child's MBR")
                    for inner in entry.child.entries:
                        if not entry.rect.contains_rect(inner.rect):
                            raise AssertionError("Child rectangle escapes its parent")
                else:
                    seen += 1
        if seen != tree.size:
            raise AssertionError("Tree holds {} leaf entries, expected {}".format(seen, tree.size))

    @keyword("Trajectory R Tree")
    def trajectory_r_tree(self, trajectories: Sequence[Trajectory], fanout: int = 32) -> RTree:
        return build_trajectory_rtree(list(trajectories), int(fanout))

    # ------------------------------------------------------------------
    # Cost model
    # ------------------------------------------------------------------

    @keyword("Cost Params")
    def cost_params(
        self,
        probabilities: str,
        K: int = 20,
        C: int = 10,
        w: float = 5.0,
        Y: int = 1000,
        L: float = 1000.0,
        segment_length: float = 1.0,
    ) -> CostParams:
        """Parameters with comma separated per-word slot *probabilities*."""
        pr = tuple(float(p) for p in str(probabilities).split(","))
        return CostParams(int(K), int(C), float(w), int(Y), float(L), float(segment_length), pr)

    @keyword("Pr Hat 1")
    def pr_hat_1(self, params: CostParams) -> float:
        return pr_hat_1(params)

    @keyword("Pr Joint")
    def pr_joint(self, params: CostParams, i: int) -> float:
        return pr_joint(int(i), params)

    @keyword("P2")
    def p2(self, params: CostParams, i: int) -> float:
        return p2(int(i), params)

    @keyword("Pr Hat I")
    def pr_hat_i(self, params: CostParams, i: int) -> float:
        return pr_hat_i(int(i), params)

    @keyword("Expected Estimate")
    def expected_estimate(self, params: CostParams) -> Dict[str, float]:
        estimate = expected_estimate(params)
        return {
            "expected_places": estimate.expected_places,
            "distance": estimate.distance,
            "approach": estimate.approach,
            "stable_terms": estimate.stable_terms,
            "series_terms": estimate.series_terms,
            "diverged": estimate.diverged,
        }

    @keyword("Pr Hat 1 Should Agree With Simulation")
    def pr_hat_1_should_agree(self, params: CostParams, samples: int, seed: int = 0) -> None:
        simulation = simulate_pr_hat_1(params, int(samples), int(seed))
        value = pr_hat_1(params)
        if not simulation.agrees_with(value):
            raise AssertionError(
                "prHat(1) = {} but simulation gives {} +- {}".format(
                    value, simulation.estimate, simulation.stderr
                )
            )

    @keyword("Jointly Contain Should Agree With Simulation")
    def jointly_contain_should_agree(
        self, params: CostParams, i: int, samples: int, seed: int = 0
    ) -> None:
        """Compare the exact probability of *i* places jointly holding the query
        with its simulated frequency, by enumerating the per-place hit patterns."""
        i = int(i)
        q = params.Q
        slots = max(int(round(params.w)), 1)
        hold = [1.0 - (1.0 - p) ** slots for p in params.pr]
        patterns = np.array(
            [[[(bits >> (place * q + word)) & 1 for word in range(q)] for place in range(i)]
             for bits in range(2 ** (i * q))],
            dtype=bool,
        )
        weights = np.ones(len(patterns))
        for word, h in enumerate(hold):
            present = patterns[:, :, word]
            weights *= np.prod(np.where(present, h, 1.0 - h), axis=1)
        exact = float(weights[jointly_contain(patterns)].sum())
        simulation = simulate_jointly_contain(params, i, int(samples), int(seed))
        if not simulation.agrees_with(exact):
            raise AssertionError(
                "Exact {} but simulation gives {} +- {}".format(
                    exact, simulation.estimate, simulation.stderr
                )
            )

    @keyword("Cost Model Identities Should Hold")
    def cost_model_identities_should_hold(self, cases: int, seed: int = 0) -> None:
        rng = np.random.default_rng(int(seed))
        for _ in range(int(cases)):
            check_costmodel(rng)

    @keyword("Short Series Should Be A Distribution")
    def short_series_should_be_a_distribution(self, cases: int, seed: int = 0) -> None:
        """Raw series terms stay in [0, 1] and sum to at most 1.

        Drawn where the recursion has no subset correction to over-count: one
        query word with up to 40 places, or up to four words with ``C <= 3``.
        """
        rng = np.random.default_rng(int(seed))
        for case in range(int(cases)):
            q = 1 if case % 2 == 0 else int(rng.integers(2, 5))
            params = CostParams(
                K=int(rng.integers(q, 60)),
                C=int(rng.integers(2, 41)) if q == 1 else int(rng.integers(2, 4)),
                w=float(rng.integers(1, 8)),
                Y=100,
                L=100.0,
                segment_length=1.0,
                pr=tuple(rng.uniform(0.0, 0.6, q).tolist()),
            )
            series = pr_hat_series(params, params.C - 1)
            if any(not 0.0 <= p <= 1.0 for p in series) or sum(series) > 1.0 + 1e-9:
                raise AssertionError("Case {}: series {} for {}".format(case, series, params))
            if stable_terms(series) != len(series):
                raise AssertionError("Case {}: stable prefix is short".format(case))

    @keyword("Series Should Match Simulation")
    def series_should_match_simulation(
        self, params: CostParams, exact_terms: int, max_i: int, samples: int, seed: int = 0
    ) -> List[int]:
        """Compare terms ``1..max_i`` with simulation and return the terms off by 3 sigma.

        Terms up to *exact_terms* must lie within 4 standard errors.
        """
        gaps = []
        for check in compare_with_simulation(params, int(max_i), int(samples), int(seed)):
            sim = check.pr_hat_simulated
            BuiltIn().log(
                "i={}: prHat {:.6g} simulated {:.6g} +- {:.2g}; p2 {:.6g} simulated {:.6g}".format(
                    check.i, check.pr_hat, sim.estimate, sim.stderr,
                    check.p2, check.p2_simulated.estimate,
                )
            )
            if not check.agrees:
                gaps.append(check.i)
            if check.i <= int(exact_terms) and not (
                sim.agrees_with(check.pr_hat, 4.0)
                and check.p2_simulated.agrees_with(check.p2, 4.0)
            ):
                raise AssertionError(
                    "Term {}: prHat {} but simulation gives {} +- {}".format(
                        check.i, check.pr_hat, sim.estimate, sim.stderr
                    )
                )
        return gaps

    @keyword("Estimate To Empirical Ratio")
    def estimate_to_empirical_ratio(self, queries: int = 50, seed: int = 0) -> float:
        """Ratio of the mean estimated distance to the mean measured top-1 distance
        on a uniform synthetic corpus."""
        config = GeneratorConfig(trajectories=1000, places_per_trajectory=(20, 60), seed=int(seed))
        corpus = generate_corpus(config)
        grid = build_grid(corpus.trajectories, 800, 12)
        index = build_index(corpus.trajectories, grid, corpus.vocabulary)
        spec = WorkloadSpec(query_count=int(queries), keywords_per_query=2, k=1, seed=int(seed))
        estimated = measured = 0.0
        for query in generate_queries(corpus.trajectories, spec):
            params = CostParams.from_corpus(corpus.trajectories, query, side=grid.side)
            estimated += expected_estimate(params).distance
            measured += top_k(query, index).results[0].distance
        ratio = estimated / measured if measured > 0 else INFINITY
        BuiltIn().log("Estimate/empirical distance ratio: {:.3f}".format(ratio))
        return ratio

    @keyword("Quad Count")
    def quad_count(self, grid: Grid, x: float, y: float, half_side: float) -> List[int]:
        count = quad_count_estimate(grid, (float(x), float(y)), float(half_side))
        return [count.overlapping, count.enclosed]

    # ------------------------------------------------------------------
    # Ingest
    # ------------------------------------------------------------------

    @keyword("Generate Corpus")
    def generate_corpus(
        self, trajectories: int = 100, seed: int = 0, clustering: float = 0.0
    ) -> Corpus:
        return generate_corpus(
            GeneratorConfig(
                trajectories=int(trajectories),
                places_per_trajectory=(5, 20),
                vocabulary_size=50,
                clustering=float(clustering),
                seed=int(seed),
            )
        )

    @keyword("Generate Workload")
    def generate_workload(self, corpus: Corpus, queries: int = 10, seed: int = 0) -> List[Query]:
        spec = WorkloadSpec(query_count=int(queries), keywords_per_query=2, k=3, seed=int(seed))
        return generate_queries(corpus.trajectories, spec)

    @keyword("Corpora Should Be Equal")
    def corpora_should_be_equal(self, first: Corpus, second: Corpus) -> None:
        if first.trajectories != second.trajectories:
            raise AssertionError("Trajectories differ")
        if first.vocabulary.words != second.vocabulary.words:
            raise AssertionError("Vocabularies differ")

    @keyword("Save And Reload Corpus")
    def save_and_reload_corpus(self, corpus: Corpus, path: str) -> Corpus:
        save_corpus(path, corpus.trajectories, corpus.vocabulary)
        return load_corpus(path)

    @keyword("Load Fixture Workload")
    def load_fixture_workload(self, path: str, corpus: Corpus) -> List[Query]:
        return load_workload(path, corpus.vocabulary)

    @keyword("Every Query Should Have A Match")
    def every_query_should_have_a_match(self, corpus: Corpus, queries: Sequence[Query]) -> None:
        for query in queries:
            if not brute_top_k(query, corpus.trajectories):
                raise AssertionError("No trajectory matches {}".format(query))

    @keyword("Keyword Frequencies Should Fit Zipf")
    def keyword_frequencies_should_fit_zipf(
        self, trajectories: int = 200, vocabulary: int = 20, seed: int = 0
    ) -> float:
        """Chi-square goodness of fit of generated word ranks; returns the p-value.

        One word per place, so each place is one draw from the rank law.
        """
        config = GeneratorConfig(
            trajectories=int(trajectories),
            places_per_trajectory=(5, 20),
            vocabulary_size=int(vocabulary),
            keywords_per_place=1.0,
            seed=int(seed),
        )
        corpus = generate_corpus(config)
        observed = np.zeros(config.vocabulary_size)
        for traj in corpus.trajectories:
            for place in traj.places:
                (word_id,) = place.keywords
                observed[int(corpus.vocabulary.word(word_id)[1:])] += 1
        probabilities = zipf_probabilities(config.vocabulary_size, config.zipf_exponent)
        expected = observed.sum() * probabilities
        result = chisquare(observed, expected)
        BuiltIn().log("chi2 {:.3f}, p-value {:.4f}".format(result.statistic, result.pvalue))
        if result.pvalue <= 0.001:
            raise AssertionError(
                "Word ranks do not follow Zipf({}): p-value {:.2g}".format(
                    config.zipf_exponent, result.pvalue
                )
            )
        return float(result.pvalue)

    # ------------------------------------------------------------------
    # Validation, benchmarks and reporting
    # ------------------------------------------------------------------

    @keyword("Run Validation")
    def run_validation(self, n: int, seed: int = 0) -> Dict[str, int]:
        return run_validation(int(n), int(seed)).instances

    @keyword("Validation With Injected Fault Should Fail")
    def validation_with_injected_fault_should_fail(
        self, n: int = 1, seed: int = 0
    ) -> Dict[str, Any]:
        """Return the reproducer of the expected failure."""
        try:
            run_validation(int(n), int(seed), inject_fault=True)
        except ValidationFailure as exc:
            if exc.check != "search":
                raise AssertionError("Unexpected failing check {!r}: {}".format(exc.check, exc))
            return exc.reproducer
        raise AssertionError("Validation passed despite the injected fault")

    @keyword("Drop Trajectory Postings")
    def drop_trajectory_postings(self, index: BckIndex, traj_id: str) -> int:
        return drop_trajectory_postings(index, index.ordinal_of(traj_id))

    @keyword("Run Query Benchmark")
    def run_query_benchmark(
        self,
        index: BckIndex,
        queries: Sequence[Query],
        algorithms: str = "ie,if,rt,irt,brute",
        repeat: int = 1,
    ) -> QueryBenchmark:
        bench = QueryBenchmark(index, list(queries), _words(algorithms), iterations=int(repeat))
        bench.run()
        return bench

    @keyword("Benchmark Rows For")
    def benchmark_rows_for(self, bench: QueryBenchmark, algorithm: str) -> List[Dict[str, Any]]:
        return [row.as_dict() for row in bench.rows if row.algorithm == algorithm]

    @keyword("Console Report As String")
    def console_report_as_string(self, bench: QueryBenchmark) -> str:
        """Render *bench* results with :class:`ConsoleReporter`."""
        buf = io.StringIO()
        ConsoleReporter(stream=buf).report(bench.results)
        return buf.getvalue()

    @keyword("Json Report Should Be Valid")
    def json_report_should_be_valid(self, bench: QueryBenchmark) -> List[Dict[str, Any]]:
        """Render *bench* with :class:`JsonReporter` and parse every line.

        Fails unless each summary line carries the timing keys and each query
        line a digest.
        """
        buf = io.StringIO()
        JsonReporter(stream=buf).report(bench.results, [row.as_dict() for row in bench.rows])
        entries = [json.loads(line) for line in buf.getvalue().splitlines()]
        if not entries:
            raise AssertionError("JSON output is empty.")
        for entry in entries:
            required = ("digest",) if entry["type"] == "query" else ("name", "mean_ms", "p95_ms")
            for key in required:
                if key not in entry:
                    raise AssertionError("JSON entry missing required key '{}': {}".format(key, entry))
        return entries

    @keyword("Result Mean Should Be Positive")
    def result_mean_should_be_positive(self, results: Dict[str, BenchmarkResult], name: str) -> None:
        if name not in results:
            raise AssertionError("Benchmark '{}' not found. Available: {}".format(name, list(results)))
        if results[name].mean_seconds <= 0:
            raise AssertionError("Benchmark '{}' mean time is not positive".format(name))
