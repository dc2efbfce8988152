"""Little-endian ``WHIX`` container for the index layouts.

Header (18 bytes)::

    magic  b"WHIX"
    u8     version (1)
    u8     layout   0=full, 1=multi, 2=single
    u16    b
    u16    m        (1 for the full table)
    u64    N

Then one section per table (1 for full and single, ``m`` for multi)::

    u64    bucket count
    repeated bucket records, keys ascending:
        key    ceil(s/8) bytes, little-endian (s = b for the full table)
        u64    identifier count
        u64[]  identifiers, ascending

Only non-empty buckets are written.  Codes are not stored; the full and
multi layouts can rebuild them from their buckets.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import CodeArray
from .errors import ParseError
from .index import FULL_TABLE_MAX_BITS, Buckets, FullTable, MultiIndexTables, SingleMultiIndexTable

MAGIC = b"WHIX"
VERSION = 1
_HEADER = struct.Struct("<4sBBHHQ")
_U64 = struct.Struct("<Q")


def _sections(index) -> tuple[int, list[Buckets]]:
    if isinstance(index, FullTable):
        return index.b, [index.nonempty()]
    if isinstance(index, MultiIndexTables):
        return index.s, index.tables
    if isinstance(index, SingleMultiIndexTable):
        return index.s, [index.table]
    raise TypeError(f"cannot serialize {type(index).__name__}")


def _key_bytes(keys: np.ndarray, width: int) -> list[bytes]:
    if keys.dtype != object and width <= 8:
        raw = keys.astype("<u8").view(np.uint8).reshape(-1, 8)[:, :width]
        return [bytes(row) for row in raw]
    return [int(k).to_bytes(width, "little") for k in keys]


def serialized_size(index) -> int:
    s, sections = _sections(index)
    width = (s + 7) // 8
    return _HEADER.size + sum(8 + len(t) * (width + 8) + 8 * t.n_entries for t in sections)


def dumps(index) -> bytes:
    s, sections = _sections(index)
    width = (s + 7) // 8
    out = [_HEADER.pack(MAGIC, VERSION, index.layout_tag, index.b, index.m, index.n)]
    for table in sections:
        out.append(_U64.pack(len(table)))
        ids = table.ids.astype("<u8")
        counts = np.diff(table.offsets)
        for i, key in enumerate(_key_bytes(table.keys, width)):
            out.append(key)
            out.append(_U64.pack(int(counts[i])))
            out.append(ids[table.offsets[i]:table.offsets[i + 1]].tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.data):
            raise ParseError(f"truncated {what}: need {size} bytes, {len(self.data) - self.pos} left", self.pos)
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def u64(self, what: str) -> int:
        return _U64.unpack(self.take(8, what))[0]


def _read_section(reader: _Reader, s: int, n: int) -> Buckets:
    width = (s + 7) // 8
    count = reader.u64("bucket count")
    keys, offsets, chunks = [], [0], []
    prev = -1
    for _ in range(count):
        at = reader.pos
        key = int.from_bytes(reader.take(width, "bucket key"), "little")
        if key >> s:
            raise ParseError(f"bucket key wider than {s} bits", at)
        if key <= prev:
            raise ParseError("bucket keys not strictly ascending", at)
        prev = key
        size = reader.u64("identifier count")
        if size == 0:
            raise ParseError("empty bucket record", at)
        ids_at = reader.pos
        ids = np.frombuffer(reader.take(8 * size, "identifier list"), dtype="<u8")
        if ids[-1] >= n or np.any(np.diff(ids.astype(np.int64)) < 0):
            raise ParseError("identifiers out of range or unsorted", ids_at)
        keys.append(key)
        offsets.append(offsets[-1] + size)
        chunks.append(ids.astype(np.int64))
    if width > 8:
        key_arr = np.empty(len(keys), dtype=object)
        key_arr[:] = keys
    else:
        key_arr = np.array(keys, dtype=np.uint64)
    ids = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
    return Buckets(key_arr, np.array(offsets, dtype=np.int64), ids)


def _codes_from_sections(sections: list[Buckets], n: int, s: int) -> CodeArray:
    m = len(sections)
    if s % 8 == 0 and s <= 64:
        subs = np.zeros((n, m), dtype="<u8")
        for j, table in enumerate(sections):
            subs[table.ids, j] = np.repeat(table.keys.astype(np.uint64), np.diff(table.offsets))
        data = subs.view(np.uint8).reshape(n, m, 8)[:, :, : s // 8].reshape(n, m * (s // 8))
        return CodeArray(data, s * m)
    values = [0] * n
    for j, table in enumerate(sections):
        shift = j * s
        for key, ids in table.items():
            for i in ids.tolist():
                values[i] |= key << shift
    return CodeArray.from_ints(values, s * len(sections))


def loads(data: bytes, codes: CodeArray | None = None):
    """Parse a container.

    The full and multi layouts rebuild their codes from the buckets when
    ``codes`` is not given; the single layout keeps ``codes`` as passed.
    """
    reader = _Reader(data)
    magic, version, layout, b, m, n = _HEADER.unpack(reader.take(_HEADER.size, "header"))
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise ParseError(f"unsupported version {version}", 4)
    if layout not in (0, 1, 2):
        raise ParseError(f"unknown layout tag {layout}", 5)
    if b == 0 or m == 0 or b % m or (layout == 0 and (m != 1 or b > FULL_TABLE_MAX_BITS)):
        raise ParseError(f"inconsistent b={b}, m={m} for layout {layout}", 6)
    s = b if layout == 0 else b // m
    n_sections = m if layout == 1 else 1
    sections = [_read_section(reader, s, n) for _ in range(n_sections)]
    if reader.pos != len(data):
        raise ParseError("trailing bytes after last section", reader.pos)
    per_section = n * m if layout == 2 else n
    for t in sections:
        if t.n_entries != per_section:
            raise ParseError(f"section holds {t.n_entries} entries, expected {per_section}", reader.pos)
    if codes is None and layout != 2:
        codes = _codes_from_sections(sections, n, s)
    if layout == 0:
        table = sections[0]
        offsets = np.zeros((1 << b) + 1, dtype=np.int64)
        counts = np.zeros(1 << b, dtype=np.int64)
        counts[table.keys.astype(np.int64)] = np.diff(table.offsets)
        np.cumsum(counts, out=offsets[1:])
        return FullTable(b, offsets, table.ids, codes)
    if layout == 1:
        return MultiIndexTables(b, m, sections, n, codes)
    return SingleMultiIndexTable(b, m, sections[0], n, codes)


def save(index, path) -> int:
    data = dumps(index)
    Path(path).write_bytes(data)
    return len(data)


def load(path, codes: CodeArray | None = None):
    return loads(Path(path).read_bytes(), codes)
