"""
Adaptive quadtree over a square space with Z-order (bit-interleaved) cell codes.

The space is a ``2**max_level x 2**max_level`` grid of base cells.  A base
cell's code interleaves its column and row: bit ``i`` of the column lands on
bit ``2i`` of the code and bit ``i`` of the row on bit ``2i + 1``.  A quad cell
at ``level`` covers ``4**(max_level - level)`` base cells whose codes form the
contiguous range ``[code, code + 4**(max_level - level) - 1]``; its
:class:`CellId` code is the smallest of them.

:func:`build_grid` splits cells top-down while they hold more than
``segment_limit`` places.  The leaves tile the space; a trajectory breaks into
:class:`Fragment` runs of consecutive places sharing a leaf.

Cells are half-open boxes ``[x0, x1) x [y0, y1)`` except along the maximum
edges of the space, which belong to the last row and column.
"""

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from trajectory_keyword_search.errors import OutOfBoundsError
from trajectory_keyword_search.model import Point, Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @classmethod
    def square(cls, center: Point, half_side: float) -> "Rect":
        return cls(
            center[0] - half_side,
            center[1] - half_side,
            center[0] + half_side,
            center[1] + half_side,
        )

    def intersects(self, other: "Rect") -> bool:
        return (
            self.min_x <= other.max_x
            and other.min_x <= self.max_x
            and self.min_y <= other.max_y
            and other.min_y <= self.max_y
        )

    def contains_rect(self, other: "Rect") -> bool:
        return (
            self.min_x <= other.min_x
            and other.max_x <= self.max_x
            and self.min_y <= other.min_y
            and other.max_y <= self.max_y
        )

    def contains_point(self, point: Point) -> bool:
        return self.min_x <= point[0] <= self.max_x and self.min_y <= point[1] <= self.max_y

    def min_dist(self, point: Point) -> float:
        """Distance from *point* to the rectangle, 0 inside."""
        dx = max(self.min_x - point[0], 0.0, point[0] - self.max_x)
        dy = max(self.min_y - point[1], 0.0, point[1] - self.max_y)
        return math.hypot(dx, dy)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.min_x, self.min_y, self.max_x, self.max_y)


@dataclass(frozen=True, order=True)
class CellId:
    code: int
    level: int


@dataclass(frozen=True, order=True)
class ZInterval:
    """Inclusive range ``[sid, eid]`` of base cell codes."""

    sid: int
    eid: int

    def __post_init__(self) -> None:
        if self.sid > self.eid:
            raise ValueError("ZInterval start {} > end {}".format(self.sid, self.eid))


@dataclass(frozen=True)
class Fragment:
    """A maximal run of consecutive places of one trajectory inside one leaf.

    Attributes:
        traj_id: Identifier of the trajectory.
        cell: Code of the leaf cell hosting the run.
        first: 1-based index of the first place of the run.
        last: 1-based index of the last place of the run.
        ordinal: 1-based position of the run in the trajectory.
    """

    traj_id: str
    cell: int
    first: int
    last: int
    ordinal: int


# ----------------------------------------------------------------------
# Bit interleaving
# ----------------------------------------------------------------------


def interleave(cx: int, cy: int, max_level: int) -> int:
    """Z-order code of base cell ``(cx, cy)``."""
    side = 1 << max_level
    if not (0 <= cx < side and 0 <= cy < side):
        raise OutOfBoundsError(
            "Cell ({}, {}) outside a {}x{} grid".format(cx, cy, side, side)
        )
    code = 0
    for bit in range(max_level):
        code |= ((cx >> bit) & 1) << (2 * bit)
        code |= ((cy >> bit) & 1) << (2 * bit + 1)
    return code


def deinterleave(code: int, max_level: int) -> Tuple[int, int]:
    """Inverse of :func:`interleave`."""
    cx = cy = 0
    for bit in range(max_level):
        cx |= ((code >> (2 * bit)) & 1) << bit
        cy |= ((code >> (2 * bit + 1)) & 1) << bit
    return cx, cy


def _spread_bits(values: np.ndarray) -> np.ndarray:
    v = values.astype(np.uint64) & np.uint64(0xFFFF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF)
    v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F)
    v = (v | (v << np.uint64(2))) & np.uint64(0x33333333)
    v = (v | (v << np.uint64(1))) & np.uint64(0x55555555)
    return v


def interleave_array(cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
    """Vectorised :func:`interleave` for columns and rows below ``2**16``."""
    return (_spread_bits(cx) | (_spread_bits(cy) << np.uint64(1))).astype(np.int64)


# ----------------------------------------------------------------------
# Grid
# ----------------------------------------------------------------------


class Grid:
    """Leaves of an adaptive quadtree plus the per-leaf place load.

    Attributes:
        bounds: Square space covered by the grid.
        max_level: Depth of the finest cells.
        segment_limit: Split threshold on places per cell.
    """

    def __init__(
        self,
        bounds: Rect,
        max_level: int,
        segment_limit: int,
        leaves: Dict[int, int],
        load: Optional[Dict[int, int]] = None,
    ) -> None:
        self.bounds = bounds
        self.max_level = max_level
        self.segment_limit = segment_limit
        self._levels: Dict[int, int] = dict(leaves)
        self._starts: List[int] = sorted(self._levels)
        self._starts_array: Optional[np.ndarray] = None
        self.load: Dict[int, int] = {c: 0 for c in self._levels}
        if load:
            self.load.update(load)

    # -- geometry -------------------------------------------------------

    @property
    def side(self) -> float:
        return self.bounds.max_x - self.bounds.min_x

    @property
    def resolution(self) -> int:
        """Base cells per side."""
        return 1 << self.max_level

    def span(self, level: int) -> int:
        """Number of base codes covered by a cell at *level*."""
        return 4 ** (self.max_level - level)

    def cell_side(self, level: int) -> float:
        return self.side / (1 << level)

    @property
    def tau(self) -> float:
        """Side of the smallest leaf."""
        return self.cell_side(max(self._levels.values()))

    def cell_rect(self, cell: CellId) -> Rect:
        cx, cy = deinterleave(cell.code, self.max_level)
        base = self.side / self.resolution
        width = self.cell_side(cell.level)
        x0 = self.bounds.min_x + cx * base
        y0 = self.bounds.min_y + cy * base
        return Rect(x0, y0, x0 + width, y0 + width)

    def code_range(self, cell: CellId) -> ZInterval:
        return ZInterval(cell.code, cell.code + self.span(cell.level) - 1)

    def min_dist_to_cell(self, point: Point, cell: CellId) -> float:
        return self.cell_rect(cell).min_dist(point)

    # -- leaves ---------------------------------------------------------

    @property
    def leaves(self) -> List[CellId]:
        return [CellId(c, self._levels[c]) for c in self._starts]

    def __len__(self) -> int:
        return len(self._starts)

    def cell(self, code: int) -> CellId:
        """The leaf whose code is exactly *code*."""
        return CellId(code, self._levels[code])

    def is_leaf(self, cell: CellId) -> bool:
        return self._levels.get(cell.code) == cell.level

    def leaf_of_code(self, base_code: int) -> CellId:
        pos = bisect.bisect_right(self._starts, base_code) - 1
        return self.cell(self._starts[pos])

    # -- point location -------------------------------------------------

    def base_cell(self, x: float, y: float) -> Tuple[int, int]:
        b = self.bounds
        if not (b.min_x <= x <= b.max_x and b.min_y <= y <= b.max_y):
            raise OutOfBoundsError("Point ({}, {}) outside grid bounds {}".format(x, y, b))
        n = self.resolution
        cx = min(int(math.floor(((x - b.min_x) / self.side) * n)), n - 1)
        cy = min(int(math.floor(((y - b.min_y) / self.side) * n)), n - 1)
        return cx, cy

    def base_code(self, x: float, y: float) -> int:
        cx, cy = self.base_cell(x, y)
        return interleave(cx, cy, self.max_level)

    def base_codes(self, xs: Sequence[float], ys: Sequence[float]) -> np.ndarray:
        """Vectorised :meth:`base_code`."""
        xa = np.asarray(xs, dtype=np.float64)
        ya = np.asarray(ys, dtype=np.float64)
        b = self.bounds
        outside = (xa < b.min_x) | (xa > b.max_x) | (ya < b.min_y) | (ya > b.max_y)
        if outside.any():
            i = int(np.argmax(outside))
            raise OutOfBoundsError(
                "Point ({}, {}) outside grid bounds {}".format(xa[i], ya[i], b)
            )
        n = self.resolution
        cx = np.minimum(np.floor(((xa - b.min_x) / self.side) * n).astype(np.int64), n - 1)
        cy = np.minimum(np.floor(((ya - b.min_y) / self.side) * n).astype(np.int64), n - 1)
        return interleave_array(cx, cy)

    def locate(self, x: float, y: float) -> CellId:
        return self.leaf_of_code(self.base_code(x, y))

    def leaf_codes(self, base_codes: np.ndarray) -> np.ndarray:
        """Leaf code for each base code."""
        if self._starts_array is None:
            self._starts_array = np.asarray(self._starts, dtype=np.int64)
        pos = np.searchsorted(self._starts_array, base_codes, side="right") - 1
        return self._starts_array[pos]

    def trajectory_codes(self, traj: Trajectory) -> np.ndarray:
        return self.base_codes([p.x for p in traj.places], [p.y for p in traj.places])

    # -- fragments ------------------------------------------------------

    def fragment_trajectory(self, traj: Trajectory) -> List[Fragment]:
        """Split *traj* into maximal runs of consecutive places per leaf."""
        cells = self.leaf_codes(self.trajectory_codes(traj)).tolist()
        fragments: List[Fragment] = []
        first = 0
        for i in range(1, len(cells) + 1):
            if i == len(cells) or cells[i] != cells[first]:
                fragments.append(
                    Fragment(traj.id, cells[first], first + 1, i, len(fragments) + 1)
                )
                first = i
        return fragments

    # -- window decomposition -------------------------------------------

    def window_to_intervals(self, window: Rect) -> List[ZInterval]:
        """Sorted disjoint code intervals covering exactly the leaves that meet *window*."""
        out: List[ZInterval] = []

        def visit(cell: CellId) -> None:
            rect = self.cell_rect(cell)
            if not rect.intersects(window):
                return
            if self.is_leaf(cell) or window.contains_rect(rect):
                rng = self.code_range(cell)
                if out and out[-1].eid + 1 == rng.sid:
                    out[-1] = ZInterval(out[-1].sid, rng.eid)
                else:
                    out.append(rng)
                return
            child_span = self.span(cell.level + 1)
            for j in range(4):
                visit(CellId(cell.code + j * child_span, cell.level + 1))

        visit(CellId(0, 0))
        return out

    def leaves_in_intervals(self, intervals: Iterable[ZInterval]) -> List[CellId]:
        """Leaves whose code range meets any of *intervals*."""
        found = []
        for interval in intervals:
            pos = max(bisect.bisect_right(self._starts, interval.sid) - 1, 0)
            while pos < len(self._starts) and self._starts[pos] <= interval.eid:
                found.append(self.cell(self._starts[pos]))
                pos += 1
        return found

    # -- adaptive splitting ---------------------------------------------

    def _split_cell(
        self, cell: CellId, sorted_codes: np.ndarray, out: Dict[int, Tuple[int, int]]
    ) -> None:
        rng = self.code_range(cell)
        lo = int(np.searchsorted(sorted_codes, rng.sid, side="left"))
        hi = int(np.searchsorted(sorted_codes, rng.eid, side="right"))
        count = hi - lo
        if count > self.segment_limit and cell.level < self.max_level:
            child_span = self.span(cell.level + 1)
            part = sorted_codes[lo:hi]
            for j in range(4):
                self._split_cell(CellId(cell.code + j * child_span, cell.level + 1), part, out)
        else:
            out[cell.code] = (cell.level, count)

    def overflowing(self) -> List[CellId]:
        """Leaves above the place limit that can still split."""
        return [
            self.cell(c)
            for c in self._starts
            if self.load[c] > self.segment_limit and self._levels[c] < self.max_level
        ]

    def split_leaf(self, cell: CellId, place_codes: np.ndarray) -> List[CellId]:
        """Replace leaf *cell* by its recursive split over *place_codes*.

        Args:
            cell: Existing leaf.
            place_codes: Base codes of every place inside the leaf.

        Returns:
            The new leaves, in code order.
        """
        parts: Dict[int, Tuple[int, int]] = {}
        self._split_cell(cell, np.sort(np.asarray(place_codes, dtype=np.int64)), parts)
        del self._levels[cell.code]
        del self.load[cell.code]
        self._starts.remove(cell.code)
        for code, (level, count) in parts.items():
            self._levels[code] = level
            self.load[code] = count
            bisect.insort(self._starts, code)
        self._starts_array = None
        logger.debug("Split leaf %s into %d leaves", cell, len(parts))
        return [CellId(code, parts[code][0]) for code in sorted(parts)]

    def add_load(self, leaf_codes: Iterable[int]) -> None:
        for code in leaf_codes:
            self.load[code] += 1


def fit_bounds(trajectories: Sequence[Trajectory]) -> Rect:
    """Smallest square anchored at the data minimum that holds every place."""
    xs = [p.x for t in trajectories for p in t.places]
    ys = [p.y for t in trajectories for p in t.places]
    if not xs:
        return Rect(0.0, 0.0, 1.0, 1.0)
    min_x, min_y = min(xs), min(ys)
    side = max(max(xs) - min_x, max(ys) - min_y)
    if side <= 0.0:
        side = 1.0
    return Rect(min_x, min_y, min_x + side, min_y + side)


def build_grid(
    trajectories: Sequence[Trajectory],
    segment_limit: int,
    max_level: int,
    bounds: Optional[Rect] = None,
) -> Grid:
    """Split the space top-down while a cell holds more than *segment_limit* places.

    Args:
        trajectories: Data whose places drive the split.
        segment_limit: Maximum places per leaf, unless at *max_level*.
        max_level: Depth limit.
        bounds: Square space; fitted to the data when ``None``.  A non-square
            rectangle is widened to a square.
    """
    if segment_limit < 1:
        raise ValueError("segment_limit must be >= 1, got {}".format(segment_limit))
    if bounds is None:
        bounds = fit_bounds(trajectories)
    side = max(bounds.max_x - bounds.min_x, bounds.max_y - bounds.min_y)
    bounds = Rect(bounds.min_x, bounds.min_y, bounds.min_x + side, bounds.min_y + side)

    grid = Grid(bounds, max_level, segment_limit, {0: 0})
    if not trajectories:
        return grid
    xs = [p.x for t in trajectories for p in t.places]
    ys = [p.y for t in trajectories for p in t.places]
    codes = np.sort(grid.base_codes(xs, ys))
    grid.split_leaf(CellId(0, 0), codes)
    logger.info(
        "Built grid with %d leaves over %d places (limit %d, max level %d)",
        len(grid), len(codes), segment_limit, max_level,
    )
    return grid
