"""
Static R-tree over trajectory bounding rectangles, bulk loaded with
sort-tile-recursive packing.

When word sets are supplied every node also carries a pseudo document, the
union of the word sets below it, which turns the tree into an IR-tree.
"""

import math
from dataclasses import dataclass, field
from typing import FrozenSet, Iterator, List, Optional, Sequence

from trajectory_keyword_search.config import DEFAULT_RTREE_FANOUT
from trajectory_keyword_search.grid import Rect
from trajectory_keyword_search.model import Trajectory


@dataclass
class RTreeEntry:
    """A child slot: either a subtree or a trajectory ordinal."""

    rect: Rect
    doc: FrozenSet[int] = frozenset()
    child: Optional["RTreeNode"] = None
    ordinal: Optional[int] = None


@dataclass
class RTreeNode:
    leaf: bool
    entries: List[RTreeEntry] = field(default_factory=list)

    @property
    def rect(self) -> Rect:
        return enclosing([e.rect for e in self.entries])

    @property
    def doc(self) -> FrozenSet[int]:
        return frozenset().union(*(e.doc for e in self.entries))


@dataclass
class RTree:
    """Bulk-loaded tree.

    Attributes:
        root: Root node; an empty leaf when built from no rectangles.
        fanout: Maximum entries per node.
        size: Number of indexed rectangles.
        has_docs: Whether entries carry pseudo documents.
    """

    root: RTreeNode
    fanout: int
    size: int
    has_docs: bool = False

    def nodes(self) -> Iterator[RTreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(e.child for e in node.entries if e.child is not None)

    @property
    def height(self) -> int:
        height = 1
        node = self.root
        while not node.leaf:
            node = node.entries[0].child
            height += 1
        return height


def enclosing(rects: Sequence[Rect]) -> Rect:
    return Rect(
        min(r.min_x for r in rects),
        min(r.min_y for r in rects),
        max(r.max_x for r in rects),
        max(r.max_y for r in rects),
    )


def _center(entry: RTreeEntry):
    r = entry.rect
    return ((r.min_x + r.max_x) / 2.0, (r.min_y + r.max_y) / 2.0)


def _pack(entries: List[RTreeEntry], fanout: int) -> List[List[RTreeEntry]]:
    """Group *entries* into nodes of at most *fanout* by x-slices then y order."""
    leaves = math.ceil(len(entries) / fanout)
    slices = math.ceil(math.sqrt(leaves))
    per_slice = slices * fanout
    by_x = sorted(entries, key=lambda e: _center(e))
    groups = []
    for start in range(0, len(by_x), per_slice):
        column = sorted(by_x[start : start + per_slice], key=lambda e: _center(e)[::-1])
        for g in range(0, len(column), fanout):
            groups.append(column[g : g + fanout])
    return groups


def build_rtree(
    mbrs: Sequence[Rect],
    fanout: int = DEFAULT_RTREE_FANOUT,
    docs: Optional[Sequence[FrozenSet[int]]] = None,
) -> RTree:
    """Sort-tile-recursive bulk load of *mbrs*; entry ``i`` stores ordinal ``i``.

    Args:
        mbrs: One rectangle per trajectory ordinal.
        fanout: Node capacity, at least 2.
        docs: Word set per ordinal; enables pseudo documents.
    """
    if fanout < 2:
        raise ValueError("fanout must be >= 2, got {}".format(fanout))
    if docs is not None and len(docs) != len(mbrs):
        raise ValueError("Expected one word set per rectangle")
    entries = [
        RTreeEntry(rect, docs[i] if docs is not None else frozenset(), ordinal=i)
        for i, rect in enumerate(mbrs)
    ]
    if not entries:
        return RTree(RTreeNode(leaf=True), fanout, 0, docs is not None)

    leaf = True
    while True:
        nodes = [RTreeNode(leaf=leaf, entries=group) for group in _pack(entries, fanout)]
        if len(nodes) == 1:
            return RTree(nodes[0], fanout, len(mbrs), docs is not None)
        entries = [RTreeEntry(node.rect, node.doc, child=node) for node in nodes]
        leaf = False


def trajectory_rect(traj: Trajectory) -> Rect:
    return Rect(*traj.mbr())


def build_trajectory_rtree(
    trajectories: Sequence[Trajectory], fanout: int = DEFAULT_RTREE_FANOUT
) -> RTree:
    return build_rtree([trajectory_rect(t) for t in trajectories], fanout)


def build_ir_tree(trajectories: Sequence[Trajectory], fanout: int = DEFAULT_RTREE_FANOUT) -> RTree:
    """R-tree whose nodes also hold the union of the words below them."""
    return build_rtree(
        [trajectory_rect(t) for t in trajectories],
        fanout,
        [t.keyword_union() for t in trajectories],
    )
