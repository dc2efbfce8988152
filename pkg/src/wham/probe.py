"""Best-first enumeration of bucket indices by weighted distance.

Bits are ranked by their flip cost; a node records which ranked positions
are flipped relative to the minimal code, as a bitmask.  Popping a node
pushes at most two successors:

* extend: also flip the position right after the rightmost flipped one;
* slide: move the rightmost flipped position one step to the right.

Both successors cost at least as much as their parent, and every subset of
positions is reachable from the empty set along exactly one path, so pops
come out in non-decreasing key order and cover all ``2**b`` codes once.
"""

from __future__ import annotations

import heapq
from typing import Iterator

import numpy as np

from .core import BinaryCode, QueryContext


def _decode_tables(order: np.ndarray) -> list[list[int]]:
    # tables[c][v]: real-space flip mask for ranked byte c reading v.
    b = len(order)
    tables = []
    for c in range((b + 7) // 8):
        width = min(8, b - 8 * c)
        table = [0] * (1 << width)
        for v in range(1, 1 << width):
            low = v & -v
            table[v] = table[v ^ low] | (1 << int(order[8 * c + low.bit_length() - 1]))
        tables.append(table)
    return tables


class ProbeEnumerator:
    """Priority-queue state yielding codes in non-decreasing distance.

    Queue entries are ``(key, mask, rightmost)`` tuples; ties on ``key``
    pop in ascending ``mask`` order.  ``emitted`` counts pops so far.
    """

    def __init__(self, ctx: QueryContext):
        self.ctx = ctx
        self.b = ctx.b
        self._d = [float(x) for x in ctx.ranked_delta]
        self._h = ctx.h.value
        self._tables = _decode_tables(ctx.order)
        self.queue: list[tuple[float, int, int]] = [(ctx.base_weight, 0, -1)]
        self.emitted = 0

    def __len__(self) -> int:
        return len(self.queue)

    def peek_key(self) -> float:
        """Key of the next code to be emitted, ``inf`` once exhausted."""
        return self.queue[0][0] if self.queue else float("inf")

    def decode(self, mask: int) -> int:
        flips = 0
        c = 0
        while mask:
            flips |= self._tables[c][mask & 0xFF]
            mask >>= 8
            c += 1
        return self._h ^ flips

    def pop_raw(self) -> tuple[int, float] | None:
        """Pop the next code as ``(integer value, key)``; ``None`` when drained."""
        queue = self.queue
        if not queue:
            return None
        key, mask, r = heapq.heappop(queue)
        d = self._d
        nxt = r + 1
        if nxt < self.b:
            bit = 1 << nxt
            heapq.heappush(queue, (key + d[nxt], mask | bit, nxt))
            if r >= 0:
                heapq.heappush(queue, (key - d[r] + d[nxt], (mask ^ (bit >> 1)) | bit, nxt))
        self.emitted += 1
        return self.decode(mask), key

    def next_index(self) -> tuple[BinaryCode, float] | None:
        item = self.pop_raw()
        if item is None:
            return None
        value, key = item
        return BinaryCode(value, self.b), key

    def __iter__(self) -> Iterator[tuple[BinaryCode, float]]:
        while (item := self.next_index()) is not None:
            yield item


def init_enumerator(ctx: QueryContext) -> ProbeEnumerator:
    return ProbeEnumerator(ctx)


def next_index(e: ProbeEnumerator) -> tuple[BinaryCode, float] | None:
    """Next ``(code, key)`` from ``e``, or ``None`` once all codes are out."""
    return e.next_index()
