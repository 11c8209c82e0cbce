"""
Tunable parameters for grid construction, indexing, search and corpus generation.

Every dataclass here is frozen; override a field with
:func:`dataclasses.replace` or by passing keyword arguments at construction::

    from trajectory_keyword_search.config import GridConfig, IndexConfig

    config = IndexConfig(grid=GridConfig(segment_limit=400))
"""

import enum
from dataclasses import dataclass, field
from typing import Optional, Tuple

DEFAULT_SEGMENT_LIMIT = 800
DEFAULT_MAX_LEVEL = 12
DEFAULT_RTREE_FANOUT = 32

# (min_x, min_y, max_x, max_y)
BoundsTuple = Tuple[float, float, float, float]


class WordPolicy(str, enum.Enum):
    """How words of neighbouring fragments are associated with a fragment."""

    PLAIN = "plain"
    NEIGHBOR_UNION = "neighbor-union"
    PREFIX = "prefix"


class WindowMode(str, enum.Enum):
    """Search region handed to candidate retrieval at each expansion step."""

    CUMULATIVE = "cumulative"
    RING = "ring"


@dataclass(frozen=True)
class GridConfig:
    """Adaptive quadtree parameters.

    Attributes:
        segment_limit: A cell splits while it holds more places than this.
        max_level: Depth of the finest cells; the base grid is
            ``2**max_level`` cells per side.
        bounds: Explicit square space, or ``None`` to fit the data.
    """

    segment_limit: int = DEFAULT_SEGMENT_LIMIT
    max_level: int = DEFAULT_MAX_LEVEL
    bounds: Optional[BoundsTuple] = None

    def __post_init__(self) -> None:
        if self.segment_limit < 1:
            raise ValueError("segment_limit must be >= 1, got {}".format(self.segment_limit))
        if not 0 <= self.max_level <= 16:
            raise ValueError("max_level must be in [0, 16], got {}".format(self.max_level))


@dataclass(frozen=True)
class IndexConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    word_policy: WordPolicy = WordPolicy.NEIGHBOR_UNION


@dataclass(frozen=True)
class SearchConfig:
    """Query-time switches.

    Attributes:
        window_mode: ``CUMULATIVE`` re-runs candidate retrieval on the whole
            window grown so far; ``RING`` only on the newly added ring.
        rtree_fanout: Node capacity of the R-tree and IR-tree baselines.
    """

    window_mode: WindowMode = WindowMode.CUMULATIVE
    rtree_fanout: int = DEFAULT_RTREE_FANOUT


@dataclass(frozen=True)
class GeneratorConfig:
    """Synthetic corpus shape.

    Attributes:
        trajectories: Number of trajectories to generate.
        places_per_trajectory: ``(low, high)`` inclusive range of places.
        vocabulary_size: Number of distinct keywords.
        zipf_exponent: Exponent ``s`` of the keyword rank distribution.
        keywords_per_place: Mean keyword draws per place (at least one).
        step_length: Mean distance between consecutive places.
        extent: Side of the square space ``[0, extent]^2``.
        clustering: 0 places trajectories uniformly, 1 only around hotspots.
        hotspots: Number of hotspot centres.
        seed: Seed of the random generator.
    """

    trajectories: int = 1000
    places_per_trajectory: Tuple[int, int] = (20, 100)
    vocabulary_size: int = 200
    zipf_exponent: float = 1.1
    keywords_per_place: float = 3.0
    step_length: float = 1.0
    extent: float = 1000.0
    clustering: float = 0.0
    hotspots: int = 8
    seed: int = 0
