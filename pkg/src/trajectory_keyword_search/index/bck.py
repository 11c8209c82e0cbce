"""
The B^ck index: keyword postings per quad cell plus place lists per trajectory.

Component 1 maps ``(word id, cell code)`` to the sorted ordinals of the
trajectories that have a fragment in the cell whose associated word set holds
the word.  Component 2 maps ``(trajectory ordinal, word id)`` to the sorted
1-based indices of the places carrying the word.  Both live in an
:class:`~trajectory_keyword_search.index.store.OrderedStore`.

Trajectories are addressed internally by their ordinal, the position in which
they entered the index.  The geometry of every trajectory is kept alongside
so the search can compute distances.
"""

import logging
from dataclasses import dataclass, field
from typing import (
    AbstractSet,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
    Set,
    Tuple,
)

import numpy as np

from trajectory_keyword_search.config import WordPolicy
from trajectory_keyword_search.errors import UnknownTrajectoryError
from trajectory_keyword_search.grid import CellId, Grid, ZInterval
from trajectory_keyword_search.index.store import (
    OrderedStore,
    split_traj_word_key,
    split_word_cell_key,
    traj_word_key,
    word_cell_key,
)
from trajectory_keyword_search.model import Place, Trajectory

logger = logging.getLogger(__name__)

WordCell = Tuple[int, int]


class Vocabulary:
    """Dense word ids in first-seen order, with per-word trajectory frequency.

    Attributes:
        df: ``df[w]`` is the number of indexed trajectories containing word ``w``.
    """

    def __init__(self, words: Iterable[str] = ()) -> None:
        self._words: List[str] = []
        self._ids: Dict[str, int] = {}
        self.df: List[int] = []
        for word in words:
            self.add(word)

    @classmethod
    def numbered(cls, size: int) -> "Vocabulary":
        """Vocabulary whose word ``i`` is the string ``str(i)``."""
        return cls(str(i) for i in range(size))

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._words == other._words and self.df == other.df

    def add(self, word: str) -> int:
        word_id = self._ids.get(word)
        if word_id is None:
            word_id = len(self._words)
            self._ids[word] = word_id
            self._words.append(word)
            self.df.append(0)
        return word_id

    def id_of(self, word: str) -> Optional[int]:
        return self._ids.get(word)

    def word(self, word_id: int) -> str:
        return self._words[word_id]

    @property
    def words(self) -> List[str]:
        return list(self._words)

    def encode(self, words: Iterable[str]) -> FrozenSet[int]:
        """Ids of *words*, assigning new ids to unseen ones."""
        return frozenset(self.add(w) for w in words)

    def lookup(self, words: Iterable[str]) -> Tuple[FrozenSet[int], List[str]]:
        """Ids of the known *words* and the list of unknown ones."""
        known = set()
        unknown = []
        for w in words:
            word_id = self._ids.get(w)
            if word_id is None:
                unknown.append(w)
            else:
                known.add(word_id)
        return frozenset(known), unknown

    def frequency(self, word_id: int) -> int:
        if 0 <= word_id < len(self.df):
            return self.df[word_id]
        return 0


@dataclass(frozen=True)
class IndexStats:
    """Summary figures used by radius estimation and reports.

    Attributes:
        trajectory_count: ``|D|``.
        space_area: Area of the indexed square space.
        tau: Side of the smallest leaf.
    """

    trajectory_count: int
    space_area: float
    tau: float
    leaf_count: int
    component1_entries: int
    component2_entries: int
    segment_limit: int
    max_level: int
    word_policy: WordPolicy
    vocabulary_size: int

    def as_dict(self) -> Dict[str, object]:
        return {
            "trajectories": self.trajectory_count,
            "space_area": self.space_area,
            "tau": self.tau,
            "leaves": self.leaf_count,
            "component1_entries": self.component1_entries,
            "component2_entries": self.component2_entries,
            "segment_limit": self.segment_limit,
            "max_level": self.max_level,
            "word_policy": self.word_policy.value,
            "vocabulary": self.vocabulary_size,
        }


@dataclass
class CellScan:
    """Result of a range scan of one word's cells.

    Attributes:
        cells: Codes of cells in the interval with a non-empty posting.
        postings: Posting list of each cell, aligned with ``cells``.
        shrunk: Interval from the first to the last cell found, ``None`` if none.
    """

    cells: List[int] = field(default_factory=list)
    postings: List[List[int]] = field(default_factory=list)
    shrunk: Optional[ZInterval] = None


def associate_fragment_words(
    raw_sets: Sequence[AbstractSet[int]], policy: WordPolicy = WordPolicy.NEIGHBOR_UNION
) -> List[FrozenSet[int]]:
    """Word set indexed for each fragment of one trajectory.

    Fragments are numbered from 1.  Odd fragments keep their own words.  Even
    fragments also take words from other fragments: ``NEIGHBOR_UNION`` adds the
    fragments right before and after, ``PREFIX`` every fragment up to the next
    one.  ``PLAIN`` keeps own words everywhere.
    """
    m = len(raw_sets)
    associated = []
    for i in range(1, m + 1):
        if i % 2 == 1 or policy is WordPolicy.PLAIN:
            associated.append(frozenset(raw_sets[i - 1]))
        elif policy is WordPolicy.NEIGHBOR_UNION:
            associated.append(frozenset().union(*raw_sets[i - 2 : min(i + 1, m)]))
        else:
            associated.append(frozenset().union(*raw_sets[: min(i + 1, m)]))
    return associated


class BckIndex:
    """Keyword-cell index over a fixed grid.

    Use :func:`build_index` to create one and
    :func:`~trajectory_keyword_search.index.snapshot.load_snapshot` to restore one.
    """

    def __init__(
        self,
        grid: Grid,
        vocabulary: Vocabulary,
        policy: WordPolicy,
        trajectories: Sequence[Trajectory],
        component1: OrderedStore,
        component2: OrderedStore,
    ) -> None:
        self.grid = grid
        self.vocabulary = vocabulary
        self.policy = WordPolicy(policy)
        self._trajectories: List[Trajectory] = list(trajectories)
        self._ordinals: Dict[str, int] = {t.id: i for i, t in enumerate(self._trajectories)}
        self.component1 = component1
        self.component2 = component2
        self._members: Optional[Dict[int, Set[int]]] = None

    # ------------------------------------------------------------------
    # Trajectories
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._trajectories)

    @property
    def trajectories(self) -> List[Trajectory]:
        return list(self._trajectories)

    def trajectory(self, ordinal: int) -> Trajectory:
        if not 0 <= ordinal < len(self._trajectories):
            raise UnknownTrajectoryError(ordinal)
        return self._trajectories[ordinal]

    def traj_id(self, ordinal: int) -> str:
        return self.trajectory(ordinal).id

    def ordinal_of(self, traj_id: str) -> int:
        try:
            return self._ordinals[traj_id]
        except KeyError:
            raise UnknownTrajectoryError(traj_id) from None

    def stats(self) -> IndexStats:
        return IndexStats(
            trajectory_count=len(self._trajectories),
            space_area=self.grid.side**2,
            tau=self.grid.tau,
            leaf_count=len(self.grid),
            component1_entries=len(self.component1),
            component2_entries=len(self.component2),
            segment_limit=self.grid.segment_limit,
            max_level=self.grid.max_level,
            word_policy=self.policy,
            vocabulary_size=len(self.vocabulary),
        )

    # ------------------------------------------------------------------
    # Lookups
    # ------------------------------------------------------------------

    def cells_in_interval(self, word_id: int, interval: ZInterval) -> CellScan:
        """Cells in *interval* with a posting for *word_id*, by one range scan."""
        scan = CellScan()
        for key, posting in self.component1.scan(
            word_cell_key(word_id, interval.sid), word_cell_key(word_id, interval.eid)
        ):
            scan.cells.append(split_word_cell_key(key)[1])
            scan.postings.append(posting)
        if scan.cells:
            scan.shrunk = ZInterval(scan.cells[0], scan.cells[-1])
        return scan

    def posting(self, word_id: int, cell: int) -> List[int]:
        return list(self.component1.get(word_cell_key(word_id, cell), []))

    def place_postings(self, ordinal: int, word_ids: Iterable[int]) -> Dict[int, List[int]]:
        """Place indices of each requested word in trajectory *ordinal*."""
        self.trajectory(ordinal)
        return {
            w: list(self.component2.get(traj_word_key(ordinal, w), [])) for w in word_ids
        }

    def restricted_trajectory(self, ordinal: int, word_ids: AbstractSet[int]) -> Trajectory:
        """Trajectory *ordinal* whose places only carry the words in *word_ids*."""
        geometry = self.trajectory(ordinal)
        per_place: List[Set[int]] = [set() for _ in geometry.places]
        for w, places in self.place_postings(ordinal, word_ids).items():
            for p in places:
                per_place[p - 1].add(w)
        return Trajectory(
            geometry.id,
            tuple(Place(p.x, p.y, frozenset(ws)) for p, ws in zip(geometry.places, per_place)),
        )

    def component1_entries(self) -> Iterator[Tuple[int, int, List[int]]]:
        """``(word id, cell, posting)`` in key order."""
        for key, posting in self.component1.items():
            word_id, cell = split_word_cell_key(key)
            yield word_id, cell, posting

    def component2_entries(self) -> Iterator[Tuple[int, int, List[int]]]:
        """``(ordinal, word id, places)`` in key order."""
        for key, places in self.component2.items():
            ordinal, word_id = split_traj_word_key(key)
            yield ordinal, word_id, places

    # ------------------------------------------------------------------
    # Insertion
    # ------------------------------------------------------------------

    def _word_cells(self, traj: Trajectory) -> Set[WordCell]:
        return word_cell_pairs(self.grid, traj, self.policy)

    def _leaf_members(self) -> Dict[int, Set[int]]:
        if self._members is None:
            members: Dict[int, Set[int]] = {code: set() for code in self.grid.load}
            for ordinal, traj in enumerate(self._trajectories):
                for code in set(self.grid.leaf_codes(self.grid.trajectory_codes(traj)).tolist()):
                    members[code].add(ordinal)
            self._members = members
        return self._members

    def _add_posting(self, word_id: int, cell: int, ordinal: int) -> None:
        key = word_cell_key(word_id, cell)
        posting = self.component1.get(key)
        if posting is None:
            self.component1.put(key, [ordinal])
        elif ordinal not in posting:
            posting.append(ordinal)
            posting.sort()

    def _remove_posting(self, word_id: int, cell: int, ordinal: int) -> None:
        key = word_cell_key(word_id, cell)
        posting = self.component1.get(key)
        if posting is None or ordinal not in posting:
            return
        posting.remove(ordinal)
        if not posting:
            self.component1.delete(key)

    def insert_trajectory(self, traj: Trajectory) -> int:
        """Add *traj*, splitting leaves that overflow, and return its ordinal.

        Trajectories through a split leaf are re-fragmented and their postings
        re-associated.  The caller must hold exclusive access.

        Raises:
            OutOfBoundsError: A place lies outside the grid bounds.
            ValueError: The id is already indexed or a word id is unknown.
        """
        if traj.id in self._ordinals:
            raise ValueError("Trajectory {!r} is already indexed".format(traj.id))
        words = traj.keyword_union()
        if words and max(words) >= len(self.vocabulary):
            raise ValueError(
                "Trajectory {!r} uses word ids outside the vocabulary".format(traj.id)
            )
        grid = self.grid
        codes = grid.trajectory_codes(traj)
        members = self._leaf_members()

        ordinal = len(self._trajectories)
        touched = grid.leaf_codes(codes).tolist()
        grid.add_load(touched)
        self._trajectories.append(traj)
        self._ordinals[traj.id] = ordinal
        for code in set(touched):
            members[code].add(ordinal)

        overflowing = [grid.cell(c) for c in sorted(set(touched)) if _overflows(grid, grid.cell(c))]
        affected: Set[int] = set()
        for cell in overflowing:
            affected |= members[cell.code]
        affected.discard(ordinal)
        old_pairs = {o: self._word_cells(self._trajectories[o]) for o in sorted(affected)}

        for cell in overflowing:
            self._split(cell, members)

        for o, old in old_pairs.items():
            new = self._word_cells(self._trajectories[o])
            for word_id, cell in sorted(old - new):
                self._remove_posting(word_id, cell, o)
            for word_id, cell in sorted(new - old):
                self._add_posting(word_id, cell, o)
        for word_id, cell in sorted(self._word_cells(traj)):
            self._add_posting(word_id, cell, ordinal)

        for word_id, places in place_lists(traj).items():
            self.component2.put(traj_word_key(ordinal, word_id), places)
        for word_id in words:
            self.vocabulary.df[word_id] += 1

        if overflowing:
            logger.info(
                "Inserted %s: split %d leaves, re-associated %d trajectories",
                traj.id, len(overflowing), len(old_pairs),
            )
        else:
            logger.debug("Inserted %s without splits", traj.id)
        return ordinal

    def _split(self, cell: CellId, members: Dict[int, Set[int]]) -> None:
        rng = self.grid.code_range(cell)
        owners = sorted(members.pop(cell.code))
        place_codes = []
        per_owner = {}
        for o in owners:
            codes = self.grid.trajectory_codes(self._trajectories[o])
            inside = codes[(codes >= rng.sid) & (codes <= rng.eid)]
            per_owner[o] = inside
            place_codes.append(inside)
        children = self.grid.split_leaf(cell, np.concatenate(place_codes))
        for child in children:
            members[child.code] = set()
        for o, inside in per_owner.items():
            for code in set(self.grid.leaf_codes(inside).tolist()):
                members[code].add(o)


def _overflows(grid: Grid, cell: CellId) -> bool:
    return grid.load[cell.code] > grid.segment_limit and cell.level < grid.max_level


def word_cell_pairs(grid: Grid, traj: Trajectory, policy: WordPolicy) -> Set[WordCell]:
    """Component 1 keys contributed by *traj* on *grid*."""
    fragments = grid.fragment_trajectory(traj)
    raw = [
        frozenset().union(*(p.keywords for p in traj.places[f.first - 1 : f.last]))
        for f in fragments
    ]
    pairs = set()
    for fragment, words in zip(fragments, associate_fragment_words(raw, policy)):
        for word_id in words:
            pairs.add((word_id, fragment.cell))
    return pairs


def place_lists(traj: Trajectory) -> Dict[int, List[int]]:
    """Component 2 values of *traj*: word id to ascending 1-based place indices."""
    lists: Dict[int, List[int]] = {}
    for i, place in enumerate(traj.places, start=1):
        for word_id in place.keywords:
            lists.setdefault(word_id, []).append(i)
    return lists


def build_index(
    trajectories: Sequence[Trajectory],
    grid: Grid,
    vocabulary: Optional[Vocabulary] = None,
    policy: WordPolicy = WordPolicy.NEIGHBOR_UNION,
) -> BckIndex:
    """Index *trajectories* over *grid*.

    Args:
        trajectories: Trajectories with integer word ids; ordinals follow
            this order.
        grid: Grid built over the same trajectories.
        vocabulary: Word table; a numbered one is made when ``None``.  Its
            ``df`` counts are recomputed.
        policy: Fragment word association policy.

    Raises:
        ValueError: Duplicate trajectory ids or word ids outside the vocabulary.
    """
    policy = WordPolicy(policy)
    max_word = max((max(t.keyword_union(), default=-1) for t in trajectories), default=-1)
    if vocabulary is None:
        vocabulary = Vocabulary.numbered(max_word + 1)
    elif max_word >= len(vocabulary):
        raise ValueError(
            "Word id {} outside a vocabulary of {} words".format(max_word, len(vocabulary))
        )
    seen: Set[str] = set()
    for t in trajectories:
        if t.id in seen:
            raise ValueError("Duplicate trajectory id {!r}".format(t.id))
        seen.add(t.id)

    vocabulary.df = [0] * len(vocabulary)
    postings: Dict[bytes, List[int]] = {}
    places: List[Tuple[bytes, List[int]]] = []
    for ordinal, traj in enumerate(trajectories):
        for word_id, cell in word_cell_pairs(grid, traj, policy):
            postings.setdefault(word_cell_key(word_id, cell), []).append(ordinal)
        for word_id, indices in place_lists(traj).items():
            places.append((traj_word_key(ordinal, word_id), indices))
        for word_id in traj.keyword_union():
            vocabulary.df[word_id] += 1

    index = BckIndex(
        grid,
        vocabulary,
        policy,
        trajectories,
        OrderedStore(postings.items()),
        OrderedStore(places),
    )
    logger.info(
        "Indexed %d trajectories: %d component 1 entries, %d component 2 entries",
        len(trajectories), len(index.component1), len(index.component2),
    )
    return index
