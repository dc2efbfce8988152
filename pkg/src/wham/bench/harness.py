"""Benchmark driver: encode a dataset, build indexes, time every method.

Timing protocol: one single-threaded pass over all queries is discarded
as warm-up, then the full query set is timed three times and the median
total is reported.  Accuracy and probe counts come from the last pass.
"""

from __future__ import annotations

import csv
import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..core import BinaryCode, WeightModel
from ..errors import ConfigurationError
from ..index import FULL_TABLE_MAX_BITS, build_full_table, build_multi_index, build_single_table, choose_m
from ..search import Criterion, brute_force_knn, knn_full_table, knn_multi_index, linear_scan_knn
from .datasets import VectorDataset, read_xvecs, synthetic
from .encode import WEIGHT_SCHEMES, EncodedDataset, lsh_encode, make_weights
from .metrics import MetricsReport, precision_at_k

log = logging.getLogger(__name__)

METHODS = ("linear_scan", "fswbc_full", "fswbc_multi", "fswbc_single", "fswbc_sort", "fswbc_pq")
REPETITIONS = 3


@dataclass
class BenchConfig:
    dataset: str = "synthetic"
    kind: str = "fvecs"
    queries: str | None = None
    n: int = 100_000
    n_queries: int = 100
    dim: int = 128
    bits: int = 64
    m: int | None = None
    ks: Sequence[int] = (1, 10, 100)
    methods: Sequence[str] = ("linear_scan", "fswbc_multi")
    weights: str = "magnitude"
    seed: int = 0
    clusters: int = 1000
    spread: float = 1.5

    def validate(self) -> None:
        unknown = [x for x in self.methods if x not in METHODS]
        if unknown:
            raise ConfigurationError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if not self.methods:
            raise ConfigurationError("no methods selected")
        if self.weights not in WEIGHT_SCHEMES:
            raise ConfigurationError(f"unknown weight scheme {self.weights!r}")
        if self.bits < 1 or self.n < 1 or self.n_queries < 1 or not self.ks or min(self.ks) < 1:
            raise ConfigurationError("bits, n, queries and every k must be positive")
        if "fswbc_full" in self.methods and self.bits > FULL_TABLE_MAX_BITS:
            raise ConfigurationError(f"fswbc_full needs bits <= {FULL_TABLE_MAX_BITS}")
        if self.m is not None and (self.m < 1 or self.bits % self.m):
            raise ConfigurationError(f"m={self.m} must divide bits={self.bits}")
        if self.dataset != "synthetic" and not os.path.exists(self.dataset):
            raise ConfigurationError(f"dataset file {self.dataset!r} not found")


@dataclass
class Workload:
    """Encoded base codes plus per-query codes, weights and ground truth."""

    enc: EncodedDataset
    queries: list[tuple[BinaryCode, WeightModel]]
    truth: list[list] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.enc.codes)


def load_vectors(cfg: BenchConfig) -> tuple[VectorDataset, VectorDataset]:
    if cfg.dataset == "synthetic":
        return synthetic(cfg.n, cfg.dim, cfg.seed, clusters=cfg.clusters, spread=cfg.spread,
                         n_queries=cfg.n_queries)
    if cfg.queries:
        return read_xvecs(cfg.dataset, cfg.kind, cfg.n), read_xvecs(cfg.queries, cfg.kind, cfg.n_queries)
    # Without a query file, hold out the tail of the base file.
    both = read_xvecs(cfg.dataset, cfg.kind, cfg.n + cfg.n_queries)
    if both.n <= cfg.n_queries:
        raise ConfigurationError(f"dataset holds {both.n} vectors, need more than {cfg.n_queries}")
    split = both.n - cfg.n_queries
    return VectorDataset(both.data[:split]), VectorDataset(both.data[split:])


def prepare_workload(cfg: BenchConfig) -> Workload:
    base, queries = load_vectors(cfg)
    enc = lsh_encode(base, cfg.bits, cfg.seed)
    qs = [make_weights(v, enc, cfg.weights, cfg.seed + i) for i, v in enumerate(queries.data)]
    kmax = max(cfg.ks)
    truth = [brute_force_knn(q, w, kmax, enc.codes) for q, w in qs]
    return Workload(enc, qs, truth)


def _searchers(cfg: BenchConfig, work: Workload, m: int) -> dict[str, tuple[Callable, int]]:
    codes = work.enc.codes
    out: dict[str, tuple[Callable, int]] = {}
    multi = single = None
    for method in cfg.methods:
        if method == "linear_scan":
            continue
        if method == "fswbc_full":
            table = build_full_table(codes)
            out[method] = (lambda q, w, k, t=table: knn_full_table(q, w, k, t), table.storage_bytes())
        elif method == "fswbc_single":
            single = single or build_single_table(codes, m)
            out[method] = (lambda q, w, k, t=single: knn_multi_index(q, w, k, t), single.storage_bytes())
        else:
            multi = multi or build_multi_index(codes, m)
            crit = {"fswbc_multi": Criterion.PLAIN, "fswbc_sort": Criterion.SORTED,
                    "fswbc_pq": Criterion.PQSTYLE}[method]
            out[method] = (lambda q, w, k, t=multi, c=crit: knn_multi_index(q, w, k, t, c), multi.storage_bytes())
    return out


def _timed_passes(fn: Callable, queries, k: int):
    for q, w in queries:
        fn(q, w, k)
    totals = []
    results = []
    for _ in range(REPETITIONS):
        results = []
        t0 = time.perf_counter()
        for q, w in queries:
            results.append(fn(q, w, k))
        totals.append(time.perf_counter() - t0)
    return statistics.median(totals), results


def run_benchmark(cfg: BenchConfig, work: Workload | None = None) -> list[MetricsReport]:
    cfg.validate()
    if work is None:
        work = prepare_workload(cfg)
    m = cfg.m or choose_m(cfg.bits, work.n)
    searchers = _searchers(cfg, work, m)
    codes = work.enc.codes
    nq = len(work.queries)
    scan = lambda q, w, k: linear_scan_knn(q, w, k, codes)  # noqa: E731
    reports = []
    for k in cfg.ks:
        scan_time, scan_results = _timed_passes(scan, work.queries, k)
        timed = {"linear_scan": (scan_time, scan_results, codes.data.nbytes, 1)}
        for method, (fn, storage) in searchers.items():
            total, results = _timed_passes(fn, work.queries, k)
            timed[method] = (total, results, storage, m)
        for method in cfg.methods:
            total, results, storage, mm = timed[method]
            precision = [precision_at_k(r, t, k) for (r, _), t in zip(results, work.truth)]
            reports.append(MetricsReport(
                method=method, bits=cfg.bits, m=mm, k=k, n=work.n, queries=nq,
                pre_at_k=statistics.fmean(precision),
                mean_time_ms=1000.0 * total / nq,
                speedup=scan_time / total if method != "linear_scan" else 1.0,
                mean_buckets=statistics.fmean(s.buckets_probed for _, s in results),
                mean_candidates=statistics.fmean(s.candidates_compared for _, s in results),
                storage_bytes=storage,
            ))
            log.info("%s k=%d pre=%.1f time=%.3fms", method, k, reports[-1].pre_at_k, reports[-1].mean_time_ms)
    return reports


def write_csv(reports: Sequence[MetricsReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MetricsReport.columns())
        writer.writeheader()
        for r in reports:
            writer.writerow(r.row())


def format_table(reports: Sequence[MetricsReport]) -> str:
    head = f"{'method':<14}{'k':>5}{'pre@k':>8}{'ms':>10}{'speedup':>9}{'buckets':>10}{'cands':>10}{'storage':>12}"
    lines = [head]
    for r in reports:
        lines.append(f"{r.method:<14}{r.k:>5}{r.pre_at_k:>8.1f}{r.mean_time_ms:>10.3f}{r.speedup:>9.2f}"
                     f"{r.mean_buckets:>10.1f}{r.mean_candidates:>10.1f}{r.storage_bytes:>12}")
    return "\n".join(lines)


def worker_count() -> int:
    """Threads for correctness checks: ``WHAM_THREADS`` capped by the CPU count."""
    cpus = os.cpu_count() or 1
    raw = os.environ.get("WHAM_THREADS")
    if not raw:
        return cpus
    try:
        return max(1, min(int(raw), cpus))
    except ValueError:
        raise ConfigurationError(f"WHAM_THREADS must be an integer, got {raw!r}") from None


def parallel_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """``list(map(fn, items))`` on a thread pool; used by correctness suites only."""
    threads = threads or worker_count()
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
