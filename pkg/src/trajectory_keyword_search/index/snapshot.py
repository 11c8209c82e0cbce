"""
Binary snapshot of a :class:`~trajectory_keyword_search.index.bck.BckIndex`.

Layout::

    b"BCKT" | version (u32) | section*

    section = tag (4 bytes) | payload length (u64) | crc32 (u32) | payload

Sections appear in a fixed order: ``META`` (grid and policy parameters),
``VOCB`` (words and document frequencies), ``GRID`` (leaves and loads),
``TRAJ`` (ids and place coordinates), ``CMP1`` and ``CMP2``.  Metadata
payloads are compact JSON with sorted keys; arrays are little-endian numpy
buffers each preceded by their length.  Equal indexes serialise to equal bytes.
"""

import json
import logging
import os
import struct
import zlib
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from trajectory_keyword_search.config import WordPolicy
from trajectory_keyword_search.errors import (
    SnapshotCorruptError,
    SnapshotError,
    SnapshotVersionError,
)
from trajectory_keyword_search.grid import Grid, Rect
from trajectory_keyword_search.index.bck import BckIndex, Vocabulary
from trajectory_keyword_search.index.store import (
    OrderedStore,
    traj_word_key,
    word_cell_key,
)
from trajectory_keyword_search.model import Place, Trajectory

logger = logging.getLogger(__name__)

MAGIC = b"BCKT"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sI")
_SECTION = struct.Struct("<4sQI")
_COUNT = struct.Struct("<Q")
_SECTION_ORDER = (b"META", b"VOCB", b"GRID", b"TRAJ", b"CMP1", b"CMP2")

PathLike = Union[str, "os.PathLike[str]"]


# ----------------------------------------------------------------------
# Encoding helpers
# ----------------------------------------------------------------------


def _json_bytes(payload: Any) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _pack_arrays(*arrays: Tuple[Sequence, str]) -> bytes:
    chunks = []
    for values, dtype in arrays:
        data = np.asarray(values, dtype=dtype)
        chunks.append(_COUNT.pack(len(data)))
        chunks.append(data.tobytes())
    return b"".join(chunks)


class _ArrayReader:
    def __init__(self, payload: bytes, tag: bytes) -> None:
        self._payload = payload
        self._offset = 0
        self._tag = tag

    def read(self, dtype: str) -> np.ndarray:
        end = self._offset + _COUNT.size
        if end > len(self._payload):
            raise SnapshotCorruptError("Section {!r} ends early".format(self._tag))
        (count,) = _COUNT.unpack_from(self._payload, self._offset)
        width = np.dtype(dtype).itemsize
        stop = end + count * width
        if stop > len(self._payload):
            raise SnapshotCorruptError("Section {!r} ends early".format(self._tag))
        self._offset = stop
        if count == 0:
            return np.empty(0, dtype=dtype)
        return np.frombuffer(self._payload, dtype=dtype, count=count, offset=end)


def _section(tag: bytes, payload: bytes) -> bytes:
    return _SECTION.pack(tag, len(payload), zlib.crc32(payload)) + payload


def _grouped(lengths: np.ndarray, flat: np.ndarray) -> List[List[int]]:
    bounds = np.concatenate(([0], np.cumsum(lengths))).tolist()
    values = flat.tolist()
    return [values[bounds[i] : bounds[i + 1]] for i in range(len(lengths))]


# ----------------------------------------------------------------------
# Writing
# ----------------------------------------------------------------------


def dump_snapshot(index: BckIndex) -> bytes:
    """Serialise *index* to bytes."""
    grid = index.grid
    meta = _json_bytes(
        {
            "bounds": list(grid.bounds.as_tuple()),
            "max_level": grid.max_level,
            "segment_limit": grid.segment_limit,
            "word_policy": index.policy.value,
        }
    )
    vocab = _json_bytes(index.vocabulary.words) + b"\n" + _pack_arrays(
        (index.vocabulary.df, "<i8")
    )
    leaves = grid.leaves
    grid_payload = _pack_arrays(
        ([c.code for c in leaves], "<i8"),
        ([c.level for c in leaves], "<i8"),
        ([grid.load[c.code] for c in leaves], "<i8"),
    )
    trajectories = index.trajectories
    coords = [v for t in trajectories for p in t.places for v in (p.x, p.y)]
    traj_payload = _json_bytes([t.id for t in trajectories]) + b"\n" + _pack_arrays(
        ([len(t) for t in trajectories], "<i8"),
        (coords, "<f8"),
    )

    c1 = list(index.component1_entries())
    cmp1 = _pack_arrays(
        ([w for w, _, _ in c1], "<i8"),
        ([c for _, c, _ in c1], "<i8"),
        ([len(p) for _, _, p in c1], "<i8"),
        ([o for _, _, p in c1 for o in p], "<i8"),
    )
    c2 = list(index.component2_entries())
    cmp2 = _pack_arrays(
        ([o for o, _, _ in c2], "<i8"),
        ([w for _, w, _ in c2], "<i8"),
        ([len(p) for _, _, p in c2], "<i8"),
        ([i for _, _, p in c2 for i in p], "<i8"),
    )
    payloads = (meta, vocab, grid_payload, traj_payload, cmp1, cmp2)
    return _HEADER.pack(MAGIC, FORMAT_VERSION) + b"".join(
        _section(tag, payload) for tag, payload in zip(_SECTION_ORDER, payloads)
    )


def save_snapshot(index: BckIndex, path: PathLike) -> Path:
    """Write *index* to *path*, replacing any existing file."""
    path = Path(path)
    data = dump_snapshot(index)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise SnapshotError("Cannot write snapshot {}: {}".format(path, exc)) from exc
    logger.info("Wrote snapshot %s (%d bytes)", path, len(data))
    return path


# ----------------------------------------------------------------------
# Reading
# ----------------------------------------------------------------------


def _split_json(payload: bytes, tag: bytes) -> Tuple[Any, bytes]:
    head, sep, rest = payload.partition(b"\n")
    if not sep:
        raise SnapshotCorruptError("Section {!r} is missing its array part".format(tag))
    try:
        return json.loads(head.decode("utf-8")), rest
    except ValueError as exc:
        raise SnapshotCorruptError("Section {!r} metadata: {}".format(tag, exc)) from exc


def _read_sections(data: bytes) -> Dict[bytes, bytes]:
    if len(data) < _HEADER.size:
        raise SnapshotCorruptError("Snapshot is truncated")
    magic, version = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotCorruptError("Not a snapshot: bad magic {!r}".format(magic))
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(
            "Snapshot format version {} is not supported (expected {})".format(
                version, FORMAT_VERSION
            )
        )
    offset = _HEADER.size
    sections = {}
    for expected in _SECTION_ORDER:
        if offset + _SECTION.size > len(data):
            raise SnapshotCorruptError("Snapshot is truncated before {!r}".format(expected))
        tag, length, crc = _SECTION.unpack_from(data, offset)
        offset += _SECTION.size
        if tag != expected:
            raise SnapshotCorruptError("Expected section {!r}, found {!r}".format(expected, tag))
        payload = data[offset : offset + length]
        if len(payload) != length:
            raise SnapshotCorruptError("Section {!r} is truncated".format(tag))
        if zlib.crc32(payload) != crc:
            raise SnapshotCorruptError("Section {!r} fails its checksum".format(tag))
        sections[tag] = payload
        offset += length
    if offset != len(data):
        raise SnapshotCorruptError("Trailing bytes after the last section")
    return sections


def parse_snapshot(data: bytes) -> BckIndex:
    """Rebuild an index from :func:`dump_snapshot` output."""
    sections = _read_sections(data)
    try:
        meta = json.loads(sections[b"META"].decode("utf-8"))
        bounds = Rect(*meta["bounds"])
        policy = WordPolicy(meta["word_policy"])
        max_level = int(meta["max_level"])
        segment_limit = int(meta["segment_limit"])
    except (ValueError, KeyError, TypeError) as exc:
        raise SnapshotCorruptError("Section b'META': {}".format(exc)) from exc

    words, rest = _split_json(sections[b"VOCB"], b"VOCB")
    vocabulary = Vocabulary(words)
    vocabulary.df = _ArrayReader(rest, b"VOCB").read("<i8").tolist()

    reader = _ArrayReader(sections[b"GRID"], b"GRID")
    codes, levels, loads = (reader.read("<i8").tolist() for _ in range(3))
    grid = Grid(
        bounds,
        max_level,
        segment_limit,
        dict(zip(codes, levels)),
        dict(zip(codes, loads)),
    )

    ids, rest = _split_json(sections[b"TRAJ"], b"TRAJ")
    reader = _ArrayReader(rest, b"TRAJ")
    lengths = reader.read("<i8")
    coords = reader.read("<f8").tolist()
    if len(ids) != len(lengths) or 2 * int(lengths.sum()) != len(coords):
        raise SnapshotCorruptError("Section b'TRAJ' has inconsistent sizes")

    reader = _ArrayReader(sections[b"CMP2"], b"CMP2")
    c2_ordinals, c2_words, c2_lengths = (reader.read("<i8") for _ in range(3))
    c2_places = _grouped(c2_lengths, reader.read("<i8"))
    keywords: List[List[set]] = [[set() for _ in range(n)] for n in lengths.tolist()]
    try:
        for ordinal, word_id, places in zip(c2_ordinals.tolist(), c2_words.tolist(), c2_places):
            for p in places:
                keywords[ordinal][p - 1].add(word_id)
    except IndexError as exc:
        raise SnapshotCorruptError("Component 2 refers to a missing place") from exc

    trajectories = []
    pos = 0
    for traj_id, places in zip(ids, keywords):
        built = []
        for kw in places:
            built.append(Place(coords[pos], coords[pos + 1], frozenset(kw)))
            pos += 2
        trajectories.append(Trajectory(traj_id, tuple(built)))

    reader = _ArrayReader(sections[b"CMP1"], b"CMP1")
    c1_words, c1_cells, c1_lengths = (reader.read("<i8") for _ in range(3))
    c1_postings = _grouped(c1_lengths, reader.read("<i8"))
    component1 = OrderedStore(
        (word_cell_key(w, c), p)
        for w, c, p in zip(c1_words.tolist(), c1_cells.tolist(), c1_postings)
    )
    component2 = OrderedStore(
        (traj_word_key(o, w), p)
        for o, w, p in zip(c2_ordinals.tolist(), c2_words.tolist(), c2_places)
    )
    return BckIndex(grid, vocabulary, policy, trajectories, component1, component2)


def load_snapshot(path: PathLike) -> BckIndex:
    """Read an index written by :func:`save_snapshot`.

    Raises:
        SnapshotVersionError: Written by another format version.
        SnapshotCorruptError: Truncated, damaged or not a snapshot at all.
        SnapshotError: The file cannot be read.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise SnapshotError("Cannot read snapshot {}: {}".format(path, exc)) from exc
    index = parse_snapshot(data)
    logger.info("Loaded snapshot %s: %d trajectories", path, len(index))
    return index
