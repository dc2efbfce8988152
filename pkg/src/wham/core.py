"""Binary codes, per-bit weight models and the weighted Hamming distance.

Bit ``i`` of a code is ``(value >> i) & 1``; bit 0 comes first.  Textual
codes (``BinaryCode.from_string``) are written bit 0 first as well, so
``"100"`` is the 3-bit code with only bit 0 set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

MAX_BITS = 256


@dataclass(frozen=True, slots=True)
class BinaryCode:
    """A fixed-width ``b``-bit code held as a Python integer."""

    value: int
    b: int

    def __post_init__(self):
        if not 1 <= self.b <= MAX_BITS:
            raise ValidationError(f"code length must be in [1, {MAX_BITS}], got {self.b}")
        if self.value < 0 or self.value >> self.b:
            raise ValidationError(f"value {self.value} does not fit in {self.b} bits")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> BinaryCode:
        value = 0
        for i, bit in enumerate(bits):
            if bit not in (0, 1):
                raise ValidationError(f"bit {i} is {bit!r}, expected 0 or 1")
            value |= bit << i
        return cls(value, len(bits))

    @classmethod
    def from_string(cls, text: str) -> BinaryCode:
        return cls.from_bits([int(ch) for ch in text])

    @classmethod
    def from_bytes(cls, data: bytes, b: int) -> BinaryCode:
        if len(data) != (b + 7) // 8:
            raise DimensionError(f"{len(data)} bytes cannot hold exactly a {b}-bit code")
        return cls(int.from_bytes(data, "little"), b)

    def to_bytes(self) -> bytes:
        return self.value.to_bytes((self.b + 7) // 8, "little")

    def bits(self) -> list[int]:
        return [(self.value >> i) & 1 for i in range(self.b)]

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.b:
            raise IndexError(i)
        return (self.value >> i) & 1

    def __len__(self) -> int:
        return self.b

    def __str__(self) -> str:
        return "".join(str(bit) for bit in self.bits())

    def flip(self, *positions: int) -> BinaryCode:
        value = self.value
        for i in positions:
            value ^= 1 << i
        return BinaryCode(value, self.b)

    def substring(self, j: int, s: int) -> int:
        """Integer value of bits ``[j*s, (j+1)*s)``."""
        return (self.value >> (j * s)) & ((1 << s) - 1)


def _snap_to_exact_grid(table: np.ndarray) -> np.ndarray:
    # Round every entry to a multiple of a power-of-two quantum small enough
    # that any signed sum of one entry per bit stays below 2**53 quanta.
    # Such sums are then exact in float64 regardless of summation order.
    total = float(np.abs(table).sum())
    if total == 0.0:
        return table
    exponent = math.frexp(total)[1]
    quantum = math.ldexp(1.0, exponent - 52)
    snapped = np.round(table / quantum) * quantum
    return snapped.astype(np.float32).astype(np.float64)


class WeightModel:
    """Per-bit weight functions ``w_i: {0,1} -> R``.

    ``table[i, x]`` is the cost charged at bit ``i`` when the query and the
    database code XOR to ``x`` there.  Weights are stored as 32-bit reals
    and snapped to a common dyadic grid (relative change below 2**-52 of
    the total weight mass), which makes every distance computed from them
    exact in 64-bit arithmetic.
    """

    __slots__ = ("table",)

    def __init__(self, table):
        arr = np.asarray(table, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2 or not 1 <= arr.shape[0] <= MAX_BITS:
            raise DimensionError(f"weight table must have shape (b, 2), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("weights must be finite")
        with np.errstate(over="ignore"):
            as32 = arr.astype(np.float32)
        if not np.all(np.isfinite(as32)):
            raise ValidationError("weights overflow 32-bit storage")
        table = _snap_to_exact_grid(as32.astype(np.float64))
        table.setflags(write=False)
        self.table = table

    @classmethod
    def unit(cls, b: int) -> WeightModel:
        """Plain Hamming distance: mismatches cost 1, matches cost 0."""
        return cls(np.column_stack([np.zeros(b), np.ones(b)]))

    @classmethod
    def from_flip_costs(cls, costs: Iterable[float]) -> WeightModel:
        costs = np.asarray(list(costs), dtype=np.float64)
        return cls(np.column_stack([np.zeros_like(costs), costs]))

    @property
    def b(self) -> int:
        return self.table.shape[0]

    def __len__(self) -> int:
        return self.b

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightModel) and np.array_equal(self.table, other.table)

    def __repr__(self) -> str:
        return f"WeightModel(b={self.b})"


def weighted_distance(q: BinaryCode, g: BinaryCode, w: WeightModel) -> float:
    """Sum of ``w_i(q_i xor g_i)`` over all bits, in ascending bit order."""
    if not q.b == g.b == w.b:
        raise DimensionError(f"lengths differ: q={q.b}, g={g.b}, w={w.b}")
    diff = q.value ^ g.value
    table = w.table
    total = 0.0
    for i in range(q.b):
        total += table[i, (diff >> i) & 1]
    return float(total)


class QueryContext:
    """Query-conditioned weights and the minimal code derived from them.

    Attributes:
        q: the query code.
        what: ``(b, 2)`` array, ``what[i, x] = w_i(x xor q_i)``.
        h: the code with the smallest weighted distance to ``q``.
        base_weight: the distance of ``h``.
        delta: ``(b,)`` non-negative cost of flipping each bit of ``h``.
        order: bit positions sorted by ``delta`` ascending (stable).
    """

    def __init__(self, q: BinaryCode, what: np.ndarray):
        b = q.b
        what = np.asarray(what, dtype=np.float64)
        if what.shape != (b, 2):
            raise DimensionError(f"expected ({b}, 2) weights, got {what.shape}")
        h_bits = what[:, 0] > what[:, 1]  # ties choose 0
        h = 0
        for i in np.flatnonzero(h_bits):
            h |= 1 << int(i)
        idx = np.arange(b)
        chosen = what[idx, h_bits.astype(np.intp)]
        delta = what[idx, 1 - h_bits.astype(np.intp)] - chosen
        base = 0.0
        for v in chosen:
            base += v
        order = np.argsort(delta, kind="stable")
        what.setflags(write=False)
        delta.setflags(write=False)
        order.setflags(write=False)
        self.q = q
        self.what = what
        self.h = BinaryCode(h, b)
        self.base_weight = float(base)
        self.delta = delta
        self.order = order

    @property
    def b(self) -> int:
        return self.q.b

    @cached_property
    def ranked_delta(self) -> np.ndarray:
        """``delta`` permuted into ranked order, i.e. ``delta[order]``."""
        return self.delta[self.order]

    @cached_property
    def byte_tables(self) -> np.ndarray:
        """Per-chunk distance lookup tables.

        ``byte_tables[c, v]`` is the summed weight of bits ``8c..8c+7`` when
        those bits of the candidate read as the byte ``v``.  A trailing chunk
        narrower than 8 bits only uses the first ``2**width`` entries.
        """
        b = self.b
        nchunks = (b + 7) // 8
        tables = np.zeros((nchunks, 256), dtype=np.float64)
        values = np.arange(256)
        for c in range(nchunks):
            for j in range(min(8, b - 8 * c)):
                bit = (values >> j) & 1
                tables[c] += self.what[8 * c + j, bit]
        tables.setflags(write=False)
        return tables

    def split(self, m: int) -> list[QueryContext]:
        """Contexts for the ``m`` contiguous substrings of the code."""
        b = self.b
        if m < 1 or b % m:
            raise DimensionError(f"m={m} does not divide b={b}")
        s = b // m
        return [
            QueryContext(BinaryCode(self.q.substring(j, s), s), self.what[j * s:(j + 1) * s].copy())
            for j in range(m)
        ]

    def __repr__(self) -> str:
        return f"QueryContext(b={self.b}, h={self.h}, base_weight={self.base_weight})"


def build_query_context(q: BinaryCode, w: WeightModel) -> QueryContext:
    if q.b != w.b:
        raise DimensionError(f"query has {q.b} bits but weights cover {w.b}")
    table = w.table
    q_bits = np.array(q.bits(), dtype=np.intp)
    what = np.column_stack([table[np.arange(q.b), q_bits], table[np.arange(q.b), 1 - q_bits]])
    return QueryContext(q, what)


def distance_via_context(ctx: QueryContext, g: BinaryCode) -> float:
    """Weighted distance of ``g`` to the context's query, in ascending bit order."""
    if g.b != ctx.b:
        raise DimensionError(f"code has {g.b} bits, context has {ctx.b}")
    what = ctx.what
    value = g.value
    total = 0.0
    for i in range(ctx.b):
        total += what[i, (value >> i) & 1]
    return float(total)


class CodeArray:
    """A database of ``n`` bit-packed codes of width ``b``.

    ``data`` is an ``(n, ceil(b/8))`` uint8 array; byte ``k`` of a row holds
    bits ``8k..8k+7`` of that code.
    """

    def __init__(self, data: np.ndarray, b: int):
        data = np.ascontiguousarray(data, dtype=np.uint8)
        nbytes = (b + 7) // 8
        if not 1 <= b <= MAX_BITS:
            raise ValidationError(f"code length must be in [1, {MAX_BITS}], got {b}")
        if data.ndim != 2 or data.shape[1] != nbytes:
            raise DimensionError(f"expected (n, {nbytes}) bytes for b={b}, got {data.shape}")
        if b % 8 and data.size and np.any(data[:, -1] >> (b % 8)):
            raise ValidationError("padding bits beyond b must be zero")
        data.setflags(write=False)
        self.data = data
        self.b = b

    @classmethod
    def from_codes(cls, codes: Iterable[BinaryCode], b: int | None = None) -> CodeArray:
        codes = list(codes)
        if b is None:
            if not codes:
                raise ValidationError("cannot infer b from an empty code list")
            b = codes[0].b
        nbytes = (b + 7) // 8
        buf = bytearray()
        for i, code in enumerate(codes):
            if code.b != b:
                raise DimensionError(f"code {i} has {code.b} bits, expected {b}")
            buf += code.to_bytes()
        data = np.frombuffer(bytes(buf), dtype=np.uint8).reshape(len(codes), nbytes)
        return cls(data, b)

    @classmethod
    def from_ints(cls, values: Iterable[int], b: int) -> CodeArray:
        return cls.from_codes((BinaryCode(int(v), b) for v in values), b)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, i: int) -> BinaryCode:
        return BinaryCode(int.from_bytes(self.data[i].tobytes(), "little"), self.b)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @cached_property
    def values(self) -> list[int]:
        """Codes as Python integers."""
        nbytes = self.data.shape[1]
        raw = self.data.tobytes()
        return [int.from_bytes(raw[k:k + nbytes], "little") for k in range(0, len(raw), nbytes)]

    @cached_property
    def bit_planes(self) -> np.ndarray:
        """``(b, n)`` uint8 array; row ``i`` holds bit ``i`` of every code."""
        planes = np.unpackbits(self.data, axis=1, bitorder="little")[:, :self.b].T.copy()
        planes.setflags(write=False)
        return planes

    def substrings(self, m: int) -> np.ndarray:
        """``(n, m)`` array of contiguous substring values, lowest bits first.

        Substrings wider than 64 bits come back as an object array of ints.
        """
        b = self.b
        if m < 1 or b % m:
            raise DimensionError(f"m={m} does not divide b={b}")
        s = b // m
        n = len(self)
        if s > 64:
            vals = self.values
            mask = (1 << s) - 1
            out = np.empty((n, m), dtype=object)
            for i, v in enumerate(vals):
                for j in range(m):
                    out[i, j] = (v >> (j * s)) & mask
            return out
        if s % 8 == 0:
            k = s // 8
            parts = self.data.reshape(n, m, k).astype(np.uint64)
            shifts = (np.arange(k, dtype=np.uint64) * np.uint64(8))
            return np.bitwise_or.reduce(parts << shifts, axis=2) if k > 1 else parts[:, :, 0]
        bits = np.unpackbits(self.data, axis=1, bitorder="little")[:, :b].reshape(n, m, s)
        weights = np.uint64(1) << np.arange(s, dtype=np.uint64)
        return (bits.astype(np.uint64) * weights).sum(axis=2, dtype=np.uint64)

    def __eq__(self, other) -> bool:
        return isinstance(other, CodeArray) and self.b == other.b and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"CodeArray(n={len(self)}, b={self.b})"
