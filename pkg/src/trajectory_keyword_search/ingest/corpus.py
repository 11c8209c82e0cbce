"""
Reading and writing trajectory corpora and query workloads.

Both are JSON lines files.  A corpus line holds one trajectory::

    {"id": "t1", "places": [{"x": 0.0, "y": 1.5, "kw": ["cafe", "park"]}]}

A workload line holds one query::

    {"x": 3.0, "y": 4.0, "kw": ["cafe", "museum"], "k": 5}

Keywords are lowercased and deduplicated per place, then mapped to word ids
in first-seen order.  Blank lines are ignored.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, List, Sequence, Tuple, Union

from trajectory_keyword_search.errors import CorpusFormatError, WorkloadError
from trajectory_keyword_search.index.bck import Vocabulary
from trajectory_keyword_search.model import Place, Query, Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class Corpus:
    trajectories: List[Trajectory] = field(default_factory=list)
    vocabulary: Vocabulary = field(default_factory=Vocabulary)

    def __len__(self) -> int:
        return len(self.trajectories)


def _records(path: Path, error: type) -> Iterator[Tuple[int, Any]]:
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise error("Cannot open {}: {}".format(path, exc)) from exc
    with handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield line_number, json.loads(line)
            except ValueError as exc:
                raise _located(error, "Invalid JSON: {}".format(exc), path, line_number) from exc


def _located(error: type, message: str, path: Path, line_number: int) -> Exception:
    if error is CorpusFormatError:
        return CorpusFormatError(message, str(path), line_number)
    return error("{}:{}: {}".format(path, line_number, message))


def _coordinate(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError("{!r} must be a number, got {!r}".format(name, value))
    value = float(value)
    if not math.isfinite(value):
        raise ValueError("{!r} must be finite, got {}".format(name, value))
    return value


def _keywords(value: Any) -> List[str]:
    if not isinstance(value, list) or not all(isinstance(w, str) for w in value):
        raise ValueError("'kw' must be a list of strings")
    words: List[str] = []
    for w in value:
        w = w.lower()
        if w not in words:
            words.append(w)
    return words


def parse_trajectory(record: Any, vocabulary: Vocabulary) -> Trajectory:
    """Build a trajectory from one decoded corpus record, growing *vocabulary*."""
    if not isinstance(record, dict):
        raise ValueError("Record must be an object")
    traj_id = record.get("id")
    if not isinstance(traj_id, str) or not traj_id:
        raise ValueError("'id' must be a non-empty string")
    places = record.get("places")
    if not isinstance(places, list) or not places:
        raise ValueError("'places' must be a non-empty list")
    built = []
    for place in places:
        if not isinstance(place, dict):
            raise ValueError("Each place must be an object")
        built.append(
            Place(
                _coordinate(place.get("x"), "x"),
                _coordinate(place.get("y"), "y"),
                vocabulary.encode(_keywords(place.get("kw", []))),
            )
        )
    return Trajectory(traj_id, tuple(built))


def load_corpus(path: PathLike) -> Corpus:
    """Parse a corpus file.

    Raises:
        CorpusFormatError: Unreadable file, malformed line or duplicate id;
            the message names the line.
    """
    path = Path(path)
    corpus = Corpus()
    seen = set()
    for line_number, record in _records(path, CorpusFormatError):
        try:
            traj = parse_trajectory(record, corpus.vocabulary)
        except ValueError as exc:
            raise CorpusFormatError(str(exc), str(path), line_number) from exc
        if traj.id in seen:
            raise CorpusFormatError(
                "Duplicate trajectory id {!r}".format(traj.id), str(path), line_number
            )
        seen.add(traj.id)
        corpus.trajectories.append(traj)
    logger.info(
        "Loaded %d trajectories and %d words from %s",
        len(corpus.trajectories), len(corpus.vocabulary), path,
    )
    return corpus


def trajectory_record(traj: Trajectory, vocabulary: Vocabulary) -> dict:
    return {
        "id": traj.id,
        "places": [
            {
                "x": p.x,
                "y": p.y,
                "kw": [vocabulary.word(w) for w in sorted(p.keywords)],
            }
            for p in traj.places
        ],
    }


def save_corpus(path: PathLike, trajectories: Iterable[Trajectory], vocabulary: Vocabulary) -> int:
    """Write *trajectories* as a corpus file and return how many were written."""
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for traj in trajectories:
            handle.write(json.dumps(trajectory_record(traj, vocabulary), separators=(",", ":")))
            handle.write("\n")
            count += 1
    logger.info("Wrote %d trajectories to %s", count, path)
    return count


def encode_query(vocabulary: Vocabulary, x: float, y: float, words: Sequence[str], k: int) -> Query:
    """Query over word ids; unknown words get negative ids that match nothing."""
    ids = []
    unknown = 0
    for word in words:
        word_id = vocabulary.id_of(word.lower())
        if word_id is None:
            unknown += 1
            word_id = -unknown
        ids.append(word_id)
    return Query(x, y, frozenset(ids), k)


def load_workload(path: PathLike, vocabulary: Vocabulary) -> List[Query]:
    """Parse a workload file against *vocabulary*.

    Raises:
        WorkloadError: Unreadable file or malformed line.
    """
    path = Path(path)
    queries = []
    for line_number, record in _records(path, WorkloadError):
        try:
            if not isinstance(record, dict):
                raise ValueError("Record must be an object")
            k = record.get("k", 1)
            if isinstance(k, bool) or not isinstance(k, int):
                raise ValueError("'k' must be an integer")
            queries.append(
                encode_query(
                    vocabulary,
                    _coordinate(record.get("x"), "x"),
                    _coordinate(record.get("y"), "y"),
                    _keywords(record.get("kw")),
                    k,
                )
            )
        except ValueError as exc:
            raise _located(WorkloadError, str(exc), path, line_number) from exc
    logger.info("Loaded %d queries from %s", len(queries), path)
    return queries


def query_record(query: Query, vocabulary: Vocabulary) -> dict:
    return {
        "x": query.x,
        "y": query.y,
        "kw": [vocabulary.word(w) for w in sorted(query.keywords) if w >= 0],
        "k": query.k,
    }


def save_workload(path: PathLike, queries: Iterable[Query], vocabulary: Vocabulary) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for query in queries:
            handle.write(json.dumps(query_record(query, vocabulary), separators=(",", ":")))
            handle.write("\n")
            count += 1
    return count
