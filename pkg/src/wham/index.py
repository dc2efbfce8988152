"""Hash-table layouts over a database of binary codes.

Every layout stores its buckets in a compressed form: a sorted array of
non-empty bucket keys, an offsets array, and the concatenated identifier
lists (each sorted ascending).  Lookups go through binary search on the
key array, or direct indexing for the dense full table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import CodeArray
from .errors import CapacityError, ConfigurationError, DimensionError

FULL_TABLE_MAX_BITS = 24

_EMPTY_IDS = np.empty(0, dtype=np.int64)
_EMPTY_IDS.setflags(write=False)


class Buckets:
    """One key -> identifier-list map in compressed sorted form."""

    __slots__ = ("keys", "offsets", "ids", "_lookup")

    def __init__(self, keys: np.ndarray, offsets: np.ndarray, ids: np.ndarray):
        self.keys = keys
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.ids = np.asarray(ids, dtype=np.int64)
        self._lookup = None
        if keys.dtype == object:
            self._lookup = {int(k): i for i, k in enumerate(keys)}

    @classmethod
    def from_pairs(cls, values: np.ndarray, ids: np.ndarray) -> Buckets:
        """Group ``ids`` by ``values``; ids within a bucket keep ascending order."""
        if values.dtype == object:
            pairs = sorted(zip((int(v) for v in values), (int(i) for i in ids)))
            keys, offsets, flat = [], [], []
            for v, i in pairs:
                if not keys or keys[-1] != v:
                    keys.append(v)
                    offsets.append(len(flat))
                flat.append(i)
            offsets.append(len(flat))
            key_arr = np.empty(len(keys), dtype=object)
            key_arr[:] = keys
            return cls(key_arr, np.array(offsets), np.array(flat, dtype=np.int64))
        values = np.asarray(values, dtype=np.uint64)
        order = np.lexsort((ids, values))
        sorted_vals = values[order]
        keys, starts = np.unique(sorted_vals, return_index=True)
        offsets = np.append(starts, len(values)).astype(np.int64)
        return cls(keys, offsets, np.asarray(ids, dtype=np.int64)[order])

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def n_entries(self) -> int:
        return len(self.ids)

    def slot(self, key: int) -> int:
        """Position of ``key`` in ``keys``, or -1 when the bucket is empty."""
        if self._lookup is not None:
            return self._lookup.get(int(key), -1)
        keys = self.keys
        if key < 0 or key >= 1 << 64:
            return -1
        i = int(np.searchsorted(keys, np.uint64(key)))
        if i < len(keys) and int(keys[i]) == key:
            return i
        return -1

    def get(self, key: int) -> np.ndarray:
        i = self.slot(key)
        if i < 0:
            return _EMPTY_IDS
        return self.ids[self.offsets[i]:self.offsets[i + 1]]

    def items(self):
        for i, key in enumerate(self.keys):
            yield int(key), self.ids[self.offsets[i]:self.offsets[i + 1]]

    def as_dict(self) -> dict[int, list[int]]:
        return {key: ids.tolist() for key, ids in self.items()}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Buckets)
            and len(self) == len(other)
            and all(int(a) == int(b) for a, b in zip(self.keys, other.keys))
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.ids, other.ids)
        )


class _Layout:
    layout_tag: int
    codes: CodeArray | None
    b: int
    m: int
    n: int

    @property
    def s(self) -> int:
        return self.b // self.m

    def storage_bytes(self) -> int:
        from .serialize import serialized_size
        return serialized_size(self)


class FullTable(_Layout):
    """Direct-index table: code value ``v`` lives in bucket ``v``.

    ``offsets`` has ``2**b + 1`` entries; bucket ``v`` is
    ``ids[offsets[v]:offsets[v + 1]]``.
    """

    layout_tag = 0

    def __init__(self, b: int, offsets: np.ndarray, ids: np.ndarray, codes: CodeArray | None = None):
        self.b = b
        self.m = 1
        self.offsets = offsets
        self.ids = ids
        self.n = len(ids)
        self.codes = codes

    def bucket(self, value: int) -> np.ndarray:
        return self.ids[self.offsets[value]:self.offsets[value + 1]]

    def nonempty(self) -> Buckets:
        """The non-empty buckets as a sparse ``Buckets`` view."""
        sizes = np.diff(self.offsets)
        keys = np.flatnonzero(sizes).astype(np.uint64)
        offsets = np.append(self.offsets[:-1][sizes > 0], self.n)
        return Buckets(keys, offsets, self.ids)

    def __repr__(self) -> str:
        return f"FullTable(b={self.b}, n={self.n})"


class MultiIndexTables(_Layout):
    """``m`` tables, table ``j`` keyed by bits ``[j*s, (j+1)*s)``."""

    layout_tag = 1

    def __init__(self, b: int, m: int, tables: list[Buckets], n: int, codes: CodeArray | None = None):
        self.b = b
        self.m = m
        self.tables = tables
        self.n = n
        self.codes = codes

    def bucket(self, j: int, key: int) -> np.ndarray:
        return self.tables[j].get(key)

    def __repr__(self) -> str:
        return f"MultiIndexTables(b={self.b}, m={self.m}, n={self.n})"


class SingleMultiIndexTable(_Layout):
    """All ``m`` substring positions merged into one table.

    Positions are not recorded; a code whose substrings repeat a value is
    listed once per occurrence under that key.
    """

    layout_tag = 2

    def __init__(self, b: int, m: int, table: Buckets, n: int, codes: CodeArray | None = None):
        self.b = b
        self.m = m
        self.table = table
        self.n = n
        self.codes = codes

    def bucket(self, j: int, key: int) -> np.ndarray:
        return self.table.get(key)

    def __repr__(self) -> str:
        return f"SingleMultiIndexTable(b={self.b}, m={self.m}, n={self.n}, keys={len(self.table)})"


def _as_code_array(codes) -> CodeArray:
    if isinstance(codes, CodeArray):
        return codes
    codes = list(codes)
    if not codes:
        raise ConfigurationError("an empty code list needs an explicit CodeArray to fix b")
    return CodeArray.from_codes(codes)


def _check_m(b: int, m: int) -> int:
    if m < 1 or b % m:
        raise ConfigurationError(f"m={m} must be a positive divisor of b={b}")
    return b // m


def build_full_table(codes) -> FullTable:
    codes = _as_code_array(codes)
    b = codes.b
    if b > FULL_TABLE_MAX_BITS:
        raise CapacityError(f"full table limited to b <= {FULL_TABLE_MAX_BITS}, got {b}")
    values = codes.substrings(1)[:, 0].astype(np.int64)
    order = np.argsort(values, kind="stable")
    counts = np.bincount(values, minlength=1 << b)
    offsets = np.zeros((1 << b) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return FullTable(b, offsets, order.astype(np.int64), codes)


def build_multi_index(codes, m: int) -> MultiIndexTables:
    codes = _as_code_array(codes)
    _check_m(codes.b, m)
    n = len(codes)
    subs = codes.substrings(m)
    ids = np.arange(n, dtype=np.int64)
    tables = [Buckets.from_pairs(subs[:, j], ids) for j in range(m)]
    return MultiIndexTables(codes.b, m, tables, n, codes)


def build_single_table(codes, m: int) -> SingleMultiIndexTable:
    codes = _as_code_array(codes)
    _check_m(codes.b, m)
    n = len(codes)
    subs = codes.substrings(m)
    ids = np.repeat(np.arange(n, dtype=np.int64), m)
    return SingleMultiIndexTable(codes.b, m, Buckets.from_pairs(subs.reshape(-1), ids), n, codes)


@dataclass(frozen=True)
class BucketSharingStats:
    """How many non-empty bucket keys occur at one position vs several."""

    n_one: int
    n_all: int

    @property
    def fraction_one(self) -> Fraction:
        return Fraction(self.n_one, self.n_all) if self.n_all else Fraction(1)

    @property
    def ratio_one(self) -> float:
        return float(100 * self.fraction_one)

    @property
    def ratio_shared(self) -> float:
        return float(100 * (1 - self.fraction_one))


def bucket_sharing_stats(codes, m: int) -> BucketSharingStats:
    codes = _as_code_array(codes)
    _check_m(codes.b, m)
    subs = codes.substrings(m)
    per_position = [np.unique(subs[:, j]) for j in range(m)]
    if not per_position or not sum(len(t) for t in per_position):
        return BucketSharingStats(0, 0)
    if subs.dtype == object:
        counts: dict[int, int] = {}
        for t in per_position:
            for v in t:
                counts[int(v)] = counts.get(int(v), 0) + 1
        occurrences = np.array(list(counts.values()))
    else:
        _, occurrences = np.unique(np.concatenate(per_position), return_counts=True)
    return BucketSharingStats(int(np.sum(occurrences == 1)), len(occurrences))


def choose_m(b: int, n: int) -> int:
    """Number of substrings for ``b``-bit codes over ``n`` items.

    The substring length is the power of two dividing ``b`` that lies
    nearest to ``log2(n)`` (ties go to the longer substring).
    """
    if b < 1:
        raise DimensionError(f"b must be positive, got {b}")
    target = math.log2(max(n, 2))
    lengths = [1 << k for k in range(b.bit_length()) if b % (1 << k) == 0]
    s = min(lengths, key=lambda s: (abs(s - target), -s))
    return b // s
