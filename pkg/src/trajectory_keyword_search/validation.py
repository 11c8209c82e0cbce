"""
Randomised oracle checks over the whole pipeline.

Each check draws seeded random instances and compares a fast component with a
slow reference:

- ``match``: the Match kernel against the quadratic window scan, with and
  without a pruning threshold;
- ``grid``: leaves tile the space, respect the split limit, fragments cover
  every place, and window decomposition meets exactly the right leaves;
- ``search``: the index search under every word policy and the three
  baselines against brute force;
- ``costmodel``: closed-form identities of the probability model; its
  series is also simulated and the terms that disagree are reported.

The first failure raises :class:`~trajectory_keyword_search.errors.ValidationFailure`
carrying a JSON-serialisable reproducer.  Search failures are shrunk to a
smaller corpus that still fails before being reported.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from trajectory_keyword_search.config import GeneratorConfig, WordPolicy
from trajectory_keyword_search.costmodel import (
    NOISE,
    CostParams,
    compare_with_simulation,
    expected_estimate,
    p1,
    pr_hat_1,
    pr_hat_series,
    pr_joint,
    stable_terms,
)
from trajectory_keyword_search.errors import ValidationFailure
from trajectory_keyword_search.grid import Rect, build_grid
from trajectory_keyword_search.index.bck import BckIndex, build_index
from trajectory_keyword_search.ingest.corpus import query_record, trajectory_record
from trajectory_keyword_search.ingest.synthetic import (
    WorkloadSpec,
    generate_corpus,
    generate_queries,
)
from trajectory_keyword_search.match import (
    enumerate_minimum_matches,
    match_min_dist,
    naive_min_match_dist,
)
from trajectory_keyword_search.model import Place, Query, Trajectory
from trajectory_keyword_search.search.baselines import InvertedFile, if_top_k, irt_top_k, rt_top_k
from trajectory_keyword_search.search.brute import brute_top_k
from trajectory_keyword_search.search.engine import top_k
from trajectory_keyword_search.search.rtree import build_ir_tree, build_trajectory_rtree

logger = logging.getLogger(__name__)

CHECKS = ("match", "grid", "search", "costmodel")

_SMALL_CORPUS = GeneratorConfig(
    trajectories=40,
    places_per_trajectory=(2, 12),
    vocabulary_size=10,
    zipf_exponent=0.8,
    keywords_per_place=1.5,
    step_length=4.0,
    extent=100.0,
    clustering=0.5,
    hotspots=3,
)


@dataclass
class ValidationReport:
    """Instances checked per check name, and cost model terms off their simulation.

    Attributes:
        instances: Instances passed per check.
        simulated_terms: Series terms compared with a simulation.
        simulation_gaps: Terms whose simulated frequency is more than three
            standard errors away, with the parameters that produced them.
    """

    instances: Dict[str, int] = field(default_factory=dict)
    simulated_terms: int = 0
    simulation_gaps: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.instances.values())


# ----------------------------------------------------------------------
# Random instances
# ----------------------------------------------------------------------


def random_trajectory(
    rng: np.random.Generator, traj_id: str = "t", vocabulary: int = 5, max_places: int = 12
) -> Trajectory:
    n = int(rng.integers(1, max_places + 1))
    coords = rng.integers(0, 20, size=(n, 2)).astype(float)
    places = []
    for x, y in coords.tolist():
        count = int(rng.integers(0, 3))
        places.append(Place(x, y, frozenset(rng.choice(vocabulary, size=count).tolist())))
    return Trajectory(traj_id, tuple(places))


def random_query(rng: np.random.Generator, vocabulary: int = 5, k: int = 1) -> Query:
    size = int(rng.integers(1, min(vocabulary, 3) + 1))
    words = rng.choice(vocabulary, size=size, replace=False).tolist()
    x, y = rng.uniform(-5.0, 25.0, 2).tolist()
    return Query(x, y, frozenset(words), k)


def drop_trajectory_postings(index: BckIndex, ordinal: int) -> int:
    """Remove *ordinal* from every Component 1 posting; return how many it left.

    Used to inject faults into an index.
    """
    removed = 0
    for key, posting in list(index.component1.items()):
        if ordinal in posting:
            posting.remove(ordinal)
            removed += 1
            if not posting:
                index.component1.delete(key)
    return removed


# ----------------------------------------------------------------------
# Checks
# ----------------------------------------------------------------------


def check_match(rng: np.random.Generator) -> None:
    traj = random_trajectory(rng)
    query = random_query(rng)
    expected = naive_min_match_dist(query, traj)
    actual = match_min_dist(query, traj)
    reproducer = {
        "trajectory": [[p.x, p.y, sorted(p.keywords)] for p in traj.places],
        "query": [query.x, query.y, sorted(query.keywords)],
    }
    if actual.distance != expected.distance:
        raise ValidationFailure(
            "match",
            "kernel distance {} != naive {}".format(actual.distance, expected.distance),
            reproducer,
        )
    if actual.matched and (actual.s, actual.e) not in enumerate_minimum_matches(query, traj):
        raise ValidationFailure(
            "match",
            "witness ({}, {}) is not a minimum match".format(actual.s, actual.e),
            reproducer,
        )
    threshold = float(rng.uniform(0.0, 40.0))
    pruned = match_min_dist(query, traj, threshold)
    if pruned.distance < expected.distance or (
        expected.distance <= threshold and pruned.distance != expected.distance
    ):
        reproducer["threshold"] = threshold
        raise ValidationFailure(
            "match",
            "pruned distance {} breaks the threshold contract (true {}, threshold {})".format(
                pruned.distance, expected.distance, threshold
            ),
            reproducer,
        )


def check_grid(rng: np.random.Generator) -> None:
    seed = int(rng.integers(2**31))
    corpus = generate_corpus(dataclasses.replace(_SMALL_CORPUS, seed=seed))
    limit = int(rng.integers(1, 30))
    max_level = int(rng.integers(0, 7))
    grid = build_grid(corpus.trajectories, limit, max_level)
    reproducer = {"seed": seed, "segment_limit": limit, "max_level": max_level}

    leaves = grid.leaves
    if sum(grid.span(c.level) for c in leaves) != 4**max_level:
        raise ValidationFailure("grid", "leaves do not tile the space", reproducer)
    for a, b in zip(leaves, leaves[1:]):
        if a.code + grid.span(a.level) != b.code:
            raise ValidationFailure(
                "grid", "leaves {} and {} overlap or leave a gap".format(a, b), reproducer
            )
    for cell in leaves:
        if grid.load[cell.code] > limit and cell.level < max_level:
            raise ValidationFailure(
                "grid", "leaf {} exceeds the split limit".format(cell), reproducer
            )

    for traj in corpus.trajectories:
        fragments = grid.fragment_trajectory(traj)
        covered = [i for f in fragments for i in range(f.first, f.last + 1)]
        if covered != list(range(1, len(traj) + 1)):
            raise ValidationFailure(
                "grid", "fragments of {} do not cover it".format(traj.id), reproducer
            )
        for f in fragments:
            for place in traj.places[f.first - 1 : f.last]:
                if grid.locate(place.x, place.y).code != f.cell:
                    raise ValidationFailure(
                        "grid", "fragment cell mismatch in {}".format(traj.id), reproducer
                    )

    center = rng.uniform(-10.0, 110.0, 2)
    window = Rect.square((float(center[0]), float(center[1])), float(rng.uniform(0.0, 60.0)))
    met = {c.code for c in grid.leaves_in_intervals(grid.window_to_intervals(window))}
    expected = {c.code for c in leaves if grid.cell_rect(c).intersects(window)}
    if met != expected:
        reproducer["window"] = list(window.as_tuple())
        raise ValidationFailure(
            "grid",
            "window meets {} leaves, expected {}".format(len(met), len(expected)),
            reproducer,
        )


def _search_mismatch(
    trajectories: Sequence[Trajectory],
    query: Query,
    policy: WordPolicy,
    limit: int,
    fault_id: Optional[str],
) -> Optional[str]:
    """Name of the first algorithm disagreeing with brute force, or ``None``."""
    grid = build_grid(trajectories, limit, 6)
    index = build_index(trajectories, grid, None, policy)
    if fault_id is not None and fault_id in {t.id for t in trajectories}:
        drop_trajectory_postings(index, index.ordinal_of(fault_id))
    expected = brute_top_k(query, trajectories).pairs()
    answers = {
        "ie": top_k(query, index),
        "if": if_top_k(query, InvertedFile.from_trajectories(trajectories), trajectories),
        "rt": rt_top_k(query, build_trajectory_rtree(trajectories, 4), trajectories),
        "irt": irt_top_k(query, build_ir_tree(trajectories, 4), trajectories),
    }
    for name, answer in answers.items():
        if answer.pairs() != expected:
            return name
    return None


def minimize_corpus(
    trajectories: List[Trajectory], fails: Callable[[List[Trajectory]], bool]
) -> List[Trajectory]:
    """Greedily drop chunks of *trajectories* while *fails* stays true."""
    current = list(trajectories)
    chunk = max(len(current) // 2, 1)
    while chunk >= 1:
        start = 0
        while start < len(current):
            candidate = current[:start] + current[start + chunk :]
            if candidate and fails(candidate):
                current = candidate
            else:
                start += chunk
        if chunk == 1:
            break
        chunk //= 2
    return current


def check_search(rng: np.random.Generator, inject_fault: bool = False) -> None:
    seed = int(rng.integers(2**31))
    corpus = generate_corpus(dataclasses.replace(_SMALL_CORPUS, seed=seed))
    trajectories = corpus.trajectories
    queries = generate_queries(
        trajectories,
        WorkloadSpec(
            query_count=1,
            keywords_per_query=int(rng.integers(1, 3)),
            k=int(rng.integers(1, 6)),
            seed=seed,
        ),
    )
    query = queries[0]
    policy = list(WordPolicy)[int(rng.integers(len(WordPolicy)))]
    limit = int(rng.integers(2, 40))
    fault_id = None
    if inject_fault:
        fault_id = brute_top_k(query, trajectories).results[0].traj_id

    failing = _search_mismatch(trajectories, query, policy, limit, fault_id)
    if failing is None:
        return
    smallest = minimize_corpus(
        trajectories, lambda ts: _search_mismatch(ts, query, policy, limit, fault_id) is not None
    )
    vocabulary = corpus.vocabulary
    raise ValidationFailure(
        "search",
        "{} disagrees with brute force (policy {}, segment limit {})".format(
            failing, policy.value, limit
        ),
        {
            "seed": seed,
            "policy": policy.value,
            "segment_limit": limit,
            "fault": fault_id,
            "query": query_record(query, vocabulary),
            "corpus": [trajectory_record(t, vocabulary) for t in smallest],
            "expected": brute_top_k(query, smallest).pairs(),
        },
    )


def check_costmodel(rng: np.random.Generator, report: Optional[ValidationReport] = None) -> None:
    """Closed-form identities of the cost model, plus a simulation of its series.

    The recursion for ``prHat`` is exact for the first two terms only; later
    terms are compared with simulation and gaps are recorded on *report*
    rather than raised.
    """
    q = int(rng.integers(1, 5))
    params = CostParams(
        K=int(rng.integers(q, 60)),
        C=int(rng.integers(2, 40)),
        w=float(rng.integers(1, 8)),
        Y=int(rng.integers(1, 1000)),
        L=float(rng.uniform(1.0, 1000.0)),
        segment_length=float(rng.uniform(0.1, 5.0)),
        pr=tuple(rng.uniform(0.0, 0.3, q).tolist()),
    )
    reproducer = {"params": {**params.__dict__, "pr": list(params.pr)}}
    h = pr_hat_1(params)
    for i in range(1, params.C):
        if abs(p1(i, params) - (1.0 - (1.0 - h) ** i)) > 1e-12:
            raise ValidationFailure(
                "costmodel", "p1({}) breaks the binomial identity".format(i), reproducer
            )
        if i > 1 and pr_joint(i, params) + 1e-15 < pr_joint(i - 1, params):
            raise ValidationFailure("costmodel", "pr_joint decreases at {}".format(i), reproducer)
    series = pr_hat_series(params, params.C - 1)
    if not math.isclose(series[0], h):
        raise ValidationFailure(
            "costmodel", "prHat(1) differs from the single place probability", reproducer
        )
    if len(series) > 1 and not math.isclose(
        series[1], pr_joint(2, params) - p1(2, params), rel_tol=1e-12, abs_tol=NOISE
    ):
        raise ValidationFailure("costmodel", "prHat(2) is not pr(2) - p1(2)", reproducer)
    stable = stable_terms(series)
    if stable < min(2, len(series)):
        raise ValidationFailure(
            "costmodel", "prHat leaves [0, 1] within the first two terms", reproducer
        )
    estimate = expected_estimate(params)
    if estimate.stable_terms != stable or estimate.diverged != (stable < len(series)):
        raise ValidationFailure(
            "costmodel", "estimate does not flag the series divergence", reproducer
        )

    if report is None:
        return
    seed = int(rng.integers(2**31))
    for check in compare_with_simulation(params, min(params.C - 1, 5), 20_000, seed):
        report.simulated_terms += 1
        if not check.agrees:
            report.simulation_gaps.append(
                {
                    "i": check.i,
                    "pr_hat": check.pr_hat,
                    "pr_hat_simulated": check.pr_hat_simulated.estimate,
                    "p2": check.p2,
                    "p2_simulated": check.p2_simulated.estimate,
                    "stderr": check.pr_hat_simulated.stderr,
                    **reproducer,
                }
            )


def run_validation(n: int, seed: int = 0, inject_fault: bool = False) -> ValidationReport:
    """Run every check on *n* seeded instances.

    Args:
        n: Instances per check; 0 passes vacuously.
        seed: Seed of the instance generator.
        inject_fault: Corrupt the index in the search check so it must fail.

    Raises:
        ValidationFailure: On the first failing instance.
    """
    rng = np.random.default_rng(seed)
    report = ValidationReport(dict.fromkeys(CHECKS, 0))
    for i in range(n):
        check_match(rng)
        report.instances["match"] += 1
        check_grid(rng)
        report.instances["grid"] += 1
        check_search(rng, inject_fault)
        report.instances["search"] += 1
        check_costmodel(rng, report)
        report.instances["costmodel"] += 1
        logger.debug("Validation instance %d passed", i + 1)
    logger.info("Validation passed: %d instances (seed %d)", report.total, seed)
    if report.simulation_gaps:
        logger.warning(
            "%d of %d cost model terms differ from simulation by more than 3 sigma",
            len(report.simulation_gaps), report.simulated_terms,
        )
    return report
