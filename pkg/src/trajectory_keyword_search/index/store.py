"""
Ordered key-value map with seek and forward range scans.

Keys are ``bytes``; fixed-width big-endian composite keys therefore sort in
the order of their integer fields.  Keys live in a sorted list searched with
:mod:`bisect`, values in a dict.
"""

import bisect
import struct
from typing import Dict, Generic, Iterable, Iterator, List, Optional, Tuple, TypeVar

V = TypeVar("V")

_PAIR = struct.Struct(">IQ")
_TRAJ_WORD = struct.Struct(">II")


def word_cell_key(word_id: int, cell: int) -> bytes:
    """Component 1 key: ``(word id, cell code)``."""
    return _PAIR.pack(word_id, cell)


def split_word_cell_key(key: bytes) -> Tuple[int, int]:
    return _PAIR.unpack(key)


def traj_word_key(ordinal: int, word_id: int) -> bytes:
    """Component 2 key: ``(trajectory ordinal, word id)``."""
    return _TRAJ_WORD.pack(ordinal, word_id)


def split_traj_word_key(key: bytes) -> Tuple[int, int]:
    return _TRAJ_WORD.unpack(key)


class OrderedStore(Generic[V]):
    """Sorted ``bytes`` keys mapped to values.

    Example::

        store = OrderedStore()
        store.put(word_cell_key(3, 10), [1, 4])
        list(store.scan(word_cell_key(3, 0), word_cell_key(3, 99)))
    """

    def __init__(self, items: Optional[Iterable[Tuple[bytes, V]]] = None) -> None:
        self._values: Dict[bytes, V] = {}
        self._keys: List[bytes] = []
        if items is not None:
            self.bulk_load(items)

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key: bytes) -> bool:
        return key in self._values

    def bulk_load(self, items: Iterable[Tuple[bytes, V]]) -> None:
        """Replace the contents with *items*; later duplicates win."""
        self._values = dict(items)
        self._keys = sorted(self._values)

    def get(self, key: bytes, default: Optional[V] = None) -> Optional[V]:
        return self._values.get(key, default)

    def put(self, key: bytes, value: V) -> None:
        if key not in self._values:
            bisect.insort(self._keys, key)
        self._values[key] = value

    def delete(self, key: bytes) -> None:
        if key in self._values:
            del self._values[key]
            del self._keys[bisect.bisect_left(self._keys, key)]

    def seek(self, key: bytes) -> int:
        """Position of the first key ``>= key``."""
        return bisect.bisect_left(self._keys, key)

    def scan(self, start: bytes, stop: bytes) -> Iterator[Tuple[bytes, V]]:
        """Entries with ``start <= key <= stop`` in key order."""
        pos = self.seek(start)
        keys = self._keys
        while pos < len(keys) and keys[pos] <= stop:
            key = keys[pos]
            yield key, self._values[key]
            pos += 1

    def items(self) -> Iterator[Tuple[bytes, V]]:
        for key in self._keys:
            yield key, self._values[key]

    def keys(self) -> List[bytes]:
        return list(self._keys)
