"""
Exception hierarchy shared by every module of the package.

All errors raised deliberately by this package derive from
:class:`TrajectorySearchError`.  Most also derive from the closest built-in
exception so callers that only know about ``ValueError`` or ``KeyError`` keep
working.
"""

from typing import Any, Dict, Optional


class TrajectorySearchError(Exception):
    """Base exception for trajectory-keyword-search errors."""


class OutOfBoundsError(TrajectorySearchError, ValueError):
    """Raised when a place or a cell coordinate falls outside the grid."""


class PlaceIndexError(TrajectorySearchError, IndexError):
    """Raised when a 1-based place window ``(s, e)`` is out of range."""


class InvalidQueryError(TrajectorySearchError, ValueError):
    """Raised when a query has no keywords, a non-positive ``k`` or bad coordinates."""


class CorpusFormatError(TrajectorySearchError, ValueError):
    """Raised when a corpus or workload file cannot be parsed.

    Attributes:
        path: File that failed to parse, when known.
        line_number: 1-based line number of the offending record, when known.
    """

    def __init__(
        self, message: str, path: Optional[str] = None, line_number: Optional[int] = None
    ) -> None:
        location = ""
        if path is not None:
            location = "{}:".format(path)
        if line_number is not None:
            location += "{}:".format(line_number)
        super().__init__("{} {}".format(location, message).strip())
        self.path = path
        self.line_number = line_number


class WorkloadError(TrajectorySearchError, ValueError):
    """Raised when a query workload cannot be generated."""


class SnapshotError(TrajectorySearchError):
    """Raised when an index snapshot cannot be written or read."""


class SnapshotVersionError(SnapshotError):
    """Raised when a snapshot was written by an unsupported format version."""


class SnapshotCorruptError(SnapshotError):
    """Raised when a snapshot is truncated or fails its checksum."""


class UnknownTrajectoryError(TrajectorySearchError, KeyError):
    """Raised when a trajectory ordinal is not present in the index."""


class ResultMismatchError(TrajectorySearchError):
    """Raised when two algorithms disagree on the answer to the same query."""


class ValidationFailure(TrajectorySearchError):
    """Raised by the oracle suite when a check fails.

    Attributes:
        check: Name of the failing check.
        reproducer: JSON-serialisable payload that reproduces the failure.
    """

    def __init__(
        self, check: str, message: str, reproducer: Optional[Dict[str, Any]] = None
    ) -> None:
        super().__init__("[{}] {}".format(check, message))
        self.check = check
        self.reproducer = reproducer or {}
