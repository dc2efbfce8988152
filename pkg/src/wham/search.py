"""Exact K-nearest-neighbour search under weighted Hamming distance.

Results are always sorted by ``(dist, id)``, and among items tied at the
K-th distance the smallest identifiers win.  Every engine returns the same
distance multiset as ``brute_force_knn``.
"""

from __future__ import annotations

import enum
import heapq
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import BinaryCode, CodeArray, WeightModel, build_query_context
from .errors import ConfigurationError, DimensionError, ValidationError
from .index import FullTable, MultiIndexTables, SingleMultiIndexTable
from .probe import ProbeEnumerator

KERNEL_MAX_SUBSTRING = 64


@dataclass(frozen=True, slots=True)
class Neighbor:
    id: int
    dist: float


@dataclass
class SearchStats:
    buckets_probed: int = 0
    candidates_compared: int = 0
    wall_time: float = 0.0
    threshold_checks: int = 0
    threshold_violations: int = 0


class Criterion(enum.Enum):
    """Termination threshold for the multi-index search.

    PLAIN sums each queue's current top after every bucket probe; SORTED
    advances all queues first and probes buckets by ascending increase of
    the queue top; PQSTYLE sums the most recently popped key of each queue.
    """

    PLAIN = _kernels.PLAIN
    SORTED = _kernels.SORTED
    PQSTYLE = _kernels.PQSTYLE


def _check_k(k: int) -> None:
    if k < 1:
        raise ValidationError(f"K must be at least 1, got {k}")


def _check_query(q: BinaryCode, w: WeightModel, b: int) -> None:
    if q.b != b or w.b != b:
        raise DimensionError(f"query has {q.b} bits and weights {w.b}, index holds {b}-bit codes")


def _finish(dists, ids) -> list[Neighbor]:
    order = np.lexsort((ids, dists))
    return [Neighbor(int(ids[i]), float(dists[i])) for i in order]


class _Workspace(threading.local):
    """Per-thread visited marks: ``seen[i] == epoch`` means visited this query."""

    def __init__(self):
        self.seen = np.zeros(0, dtype=np.int64)
        self.epoch = 0

    def next_epoch(self, n: int) -> tuple[np.ndarray, int]:
        if len(self.seen) < n:
            self.seen = np.zeros(n, dtype=np.int64)
            self.epoch = 0
        self.epoch += 1
        return self.seen, self.epoch


_workspace = _Workspace()


# -- lookup tables -------------------------------------------------------

_BYTE_BITS = ((np.arange(256)[:, None] >> np.arange(8)) & 1).astype(bool)
_BYTE_BITS_F = _BYTE_BITS.astype(np.float64)
_BYTE_BITS_U = _BYTE_BITS.astype(np.uint64)


def query_tables(q: BinaryCode, w: WeightModel) -> np.ndarray:
    """``(b, 2)`` query-conditioned weights ``w_i(x xor q_i)``."""
    q_bits = np.unpackbits(np.frombuffer(q.to_bytes(), dtype=np.uint8), bitorder="little")[:q.b]
    rows = np.arange(q.b)
    return np.column_stack([w.table[rows, q_bits], w.table[rows, 1 - q_bits]])


def byte_tables(what: np.ndarray) -> np.ndarray:
    """``tables[c, v]``: summed weight of byte ``c`` reading ``v``.

    Built as a base sum plus a 0/1 matrix product, which is exact because
    weight models live on a grid where all such partial sums are exact.
    """
    b = what.shape[0]
    nch = (b + 7) // 8
    padded = np.zeros((nch * 8, 2))
    padded[:b] = what
    base = padded[:, 0].reshape(nch, 8).sum(axis=1)
    diff = (padded[:, 1] - padded[:, 0]).reshape(nch, 8)
    return base[:, None] + diff @ _BYTE_BITS_F.T


@dataclass
class _Prepared:
    s: int
    d: np.ndarray
    base: np.ndarray
    h: np.ndarray
    dec: np.ndarray
    dtab: np.ndarray


def _prepare(q: BinaryCode, w: WeightModel, m: int) -> _Prepared:
    # Vectorised equivalent of build_query_context(q, w).split(m).
    what = query_tables(q, w)
    b = q.b
    s = b // m
    flip = what[:, 0] > what[:, 1]
    delta = np.abs(what[:, 1] - what[:, 0]).reshape(m, s)
    order = np.argsort(delta, axis=1, kind="stable")
    d = np.take_along_axis(delta, order, axis=1)
    base = np.minimum(what[:, 0], what[:, 1]).reshape(m, s).sum(axis=1)
    h = (flip.reshape(m, s).astype(np.uint64) << np.arange(s, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)
    nch = (s + 7) // 8
    pos = np.zeros((m, nch * 8), dtype=np.uint64)
    pos[:, :s] = np.uint64(1) << order.astype(np.uint64)
    dec = (pos.reshape(m, nch, 8) @ _BYTE_BITS_U.T)
    return _Prepared(s, d, base, h, dec, byte_tables(what))


class _KernelTables:
    """Bucket arrays of a multi-index layout flattened for the kernel."""

    def __init__(self, index):
        if isinstance(index, MultiIndexTables):
            tables = index.tables
            sizes = [len(t) for t in tables]
            self.lo = np.cumsum([0] + sizes[:-1]).astype(np.int64)
            self.hi = self.lo + np.array(sizes, dtype=np.int64)
            id_base = np.cumsum([0] + [t.n_entries for t in tables[:-1]])
            self.keys = np.concatenate([t.keys for t in tables]).astype(np.uint64)
            self.starts = np.concatenate([t.offsets[:-1] + off for t, off in zip(tables, id_base)])
            self.ends = np.concatenate([t.offsets[1:] + off for t, off in zip(tables, id_base)])
            self.ids = np.concatenate([t.ids for t in tables])
        else:
            table = index.table
            self.lo = np.zeros(index.m, dtype=np.int64)
            self.hi = np.full(index.m, len(table), dtype=np.int64)
            self.keys = table.keys.astype(np.uint64)
            self.starts = table.offsets[:-1].copy()
            self.ends = table.offsets[1:].copy()
            self.ids = table.ids
        self.starts = self.starts.astype(np.int64)
        self.ends = self.ends.astype(np.int64)


_kernel_cache: dict[int, tuple[object, _KernelTables]] = {}
_kernel_lock = threading.Lock()


def _kernel_tables(index) -> _KernelTables:
    key = id(index)
    with _kernel_lock:
        hit = _kernel_cache.get(key)
        if hit is not None and hit[0] is index:
            return hit[1]
        tables = _KernelTables(index)
        _kernel_cache[key] = (index, tables)
        if len(_kernel_cache) > 16:
            _kernel_cache.pop(next(iter(_kernel_cache)))
        return tables


# -- engines -------------------------------------------------------------

def _require_codes(index) -> CodeArray:
    if index.codes is None:
        raise ConfigurationError("index has no codes attached; pass the database codes when loading it")
    return index.codes


def knn_full_table(q: BinaryCode, w: WeightModel, k: int, table: FullTable):
    """Probe buckets of a direct-index table until at least ``k`` ids are collected."""
    _check_k(k)
    _check_query(q, w, table.b)
    t0 = time.perf_counter()
    stats = SearchStats()
    target = min(k, table.n)
    enum_ = ProbeEnumerator(build_query_context(q, w))
    ids: list[int] = []
    dists: list[float] = []
    while len(ids) < target:
        item = enum_.pop_raw()
        if item is None:
            break
        value, key = item
        stats.buckets_probed += 1
        bucket = table.bucket(value)
        if len(bucket):
            ids.extend(bucket.tolist())
            dists.extend([key] * len(bucket))
    stats.candidates_compared = len(ids)
    result = _finish(np.array(dists), np.array(ids, dtype=np.int64))[:target]
    stats.wall_time = time.perf_counter() - t0
    return result, stats


def knn_multi_index(q: BinaryCode, w: WeightModel, k: int, index, crit: Criterion = Criterion.PLAIN,
                    *, engine: str = "auto"):
    """Exact KNN over ``MultiIndexTables`` or ``SingleMultiIndexTable``.

    ``engine`` picks the compiled kernel (``"kernel"``), the pure-Python
    reference (``"python"``), or the kernel whenever substrings fit in 64
    bits (``"auto"``).
    """
    _check_k(k)
    if not isinstance(index, (MultiIndexTables, SingleMultiIndexTable)):
        raise ConfigurationError(f"expected a multi-index layout, got {type(index).__name__}")
    _check_query(q, w, index.b)
    crit = Criterion(crit)
    codes = _require_codes(index)
    if engine == "auto":
        engine = "kernel" if index.s <= KERNEL_MAX_SUBSTRING else "python"
    t0 = time.perf_counter()
    if engine == "python":
        result, stats = _reference_multi_index(q, w, k, index, crit, codes)
    elif engine == "kernel":
        if index.s > KERNEL_MAX_SUBSTRING:
            raise ConfigurationError(f"kernel handles substrings up to {KERNEL_MAX_SUBSTRING} bits")
        result, stats = _kernel_multi_index(q, w, k, index, crit, codes)
    else:
        raise ConfigurationError(f"unknown engine {engine!r}")
    stats.wall_time = time.perf_counter() - t0
    return result, stats


def _kernel_multi_index(q, w, k, index, crit, codes):
    prep = _prepare(q, w, index.m)
    tabs = _kernel_tables(index)
    n = len(codes)
    cap = min(k, n)
    seen, epoch = _workspace.next_epoch(n)
    out_d = np.empty(cap)
    out_i = np.empty(cap, dtype=np.int64)
    raw = np.zeros(_kernels.N_STATS, dtype=np.int64)
    size = _kernels.multi_index_search(
        prep.s, prep.d, prep.base, prep.h, prep.dec, tabs.lo, tabs.hi, tabs.keys,
        tabs.starts, tabs.ends, tabs.ids, codes.data, prep.dtab, cap, crit.value,
        seen, epoch, out_d, out_i, raw,
    )
    stats = SearchStats(
        buckets_probed=int(raw[_kernels.STAT_PROBES]),
        candidates_compared=int(raw[_kernels.STAT_CANDIDATES]),
        threshold_checks=int(raw[_kernels.STAT_CHECKS]),
        threshold_violations=int(raw[_kernels.STAT_VIOLATIONS]),
    )
    return _finish(out_d[:size], out_i[:size]), stats


class CandidateHeap:
    """Bounded max-heap of neighbours keyed by ``(dist, id)``, with dedup."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._heap: list[tuple[float, int]] = []  # (-dist, -id)
        self.seen: set[int] = set()

    def __len__(self) -> int:
        return len(self._heap)

    def full(self) -> bool:
        return len(self._heap) >= self.capacity

    def root(self) -> Neighbor:
        nd, ni = self._heap[0]
        return Neighbor(-ni, -nd)

    def offer(self, idx: int, dist: float) -> bool:
        """Consider ``idx``; ``False`` if it was already seen this query."""
        if idx in self.seen:
            return False
        self.seen.add(idx)
        item = (-dist, -idx)
        if len(self._heap) < self.capacity:
            heapq.heappush(self._heap, item)
        elif item > self._heap[0]:
            heapq.heapreplace(self._heap, item)
        return True

    def neighbors(self) -> list[Neighbor]:
        return sorted((Neighbor(-ni, -nd) for nd, ni in self._heap), key=lambda x: (x.dist, x.id))


def _reference_multi_index(q, w, k, index, crit, codes):
    ctx = build_query_context(q, w)
    m = index.m
    enums = [ProbeEnumerator(sub) for sub in ctx.split(m)]
    what = ctx.what.tolist()
    values = codes.values
    n = len(codes)
    heap = CandidateHeap(min(k, n))
    stats = SearchStats()
    last = [sub.ctx.base_weight for sub in enums]
    inf = float("inf")

    def distance(value: int) -> float:
        total = 0.0
        for i in range(q.b):
            total += what[i][(value >> i) & 1]
        return total

    done = n == 0
    while not done:
        start_top = [e.peek_key() for e in enums]
        live = [t for t in range(m) if start_top[t] < inf]
        if not live:
            break
        cur_top = list(start_top)
        prev_last = list(last)
        popped: dict[int, tuple[int, float]] = {}
        if crit is Criterion.SORTED:
            for t in live:
                popped[t] = enums[t].pop_raw()
                last[t] = popped[t][1]
                cur_top[t] = enums[t].peek_key()
            live.sort(key=lambda t: (cur_top[t] - popped[t][1], t))
        probed: set[int] = set()
        for t in live:
            if crit is not Criterion.SORTED:
                popped[t] = enums[t].pop_raw()
                last[t] = popped[t][1]
                cur_top[t] = enums[t].peek_key()
            stats.buckets_probed += 1
            probed.add(t)
            for idx in index.bucket(t, popped[t][0]).tolist():
                if heap.offer(idx, distance(values[idx])):
                    stats.candidates_compared += 1
            if heap.full():
                s_mid = sum(start_top)
                s_bar = sum(cur_top[u] if u in probed else start_top[u] for u in range(m))
                s_til = sum(popped[u][1] if u in probed else prev_last[u] for u in range(m))
                stats.threshold_checks += 1
                if not s_til <= s_mid <= s_bar:
                    stats.threshold_violations += 1
                threshold = s_til if crit is Criterion.PQSTYLE else s_bar
                if heap.root().dist <= threshold or len(heap.seen) == n:
                    done = True
                    break
    return heap.neighbors(), stats


def linear_scan_knn(q: BinaryCode, w: WeightModel, k: int, codes: CodeArray):
    """Exhaustive scan using one 256-entry lookup table per code byte."""
    _check_k(k)
    _check_query(q, w, codes.b)
    t0 = time.perf_counter()
    dtab = byte_tables(query_tables(q, w))
    cap = min(k, len(codes))
    out_d = np.empty(cap)
    out_i = np.empty(cap, dtype=np.int64)
    size = _kernels.linear_scan(codes.data, dtab, cap, out_d, out_i)
    result = _finish(out_d[:size], out_i[:size])
    stats = SearchStats(candidates_compared=len(codes), wall_time=time.perf_counter() - t0)
    return result, stats


def brute_force_distances(q: BinaryCode, w: WeightModel, codes: CodeArray) -> np.ndarray:
    """Distances of every code, summed one bit position at a time."""
    _check_query(q, w, codes.b)
    bits = codes.bit_planes
    total = np.zeros(len(codes))
    for i in range(codes.b):
        xor = bits[i] ^ ((q.value >> i) & 1)
        total += w.table[i][xor]
    return total


def brute_force_knn(q: BinaryCode, w: WeightModel, k: int, codes: CodeArray) -> list[Neighbor]:
    """Ground truth: full distance computation and a complete sort."""
    _check_k(k)
    dists = brute_force_distances(q, w, codes)
    order = np.lexsort((np.arange(len(dists)), dists))[:k]
    return [Neighbor(int(i), float(dists[i])) for i in order]


def popcount_knn(q: BinaryCode, k: int, codes: CodeArray) -> list[Neighbor]:
    """Plain Hamming top-k by popcount over the packed bytes."""
    _check_k(k)
    xor = codes.data ^ np.frombuffer(q.to_bytes(), dtype=np.uint8)
    dists = np.unpackbits(xor, axis=1).sum(axis=1, dtype=np.int64).astype(np.float64)
    order = np.lexsort((np.arange(len(dists)), dists))[:k]
    return [Neighbor(int(i), float(dists[i])) for i in order]


def knn(q: BinaryCode, w: WeightModel, k: int, index, crit: Criterion = Criterion.PLAIN):
    """Dispatch on the index layout."""
    if isinstance(index, FullTable):
        return knn_full_table(q, w, k, index)
    return knn_multi_index(q, w, k, index, crit)
