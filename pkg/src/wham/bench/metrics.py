"""Accuracy and timing metrics for benchmark runs."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, fields
from typing import Sequence

from ..search import Neighbor


def precision_at_k(returned: Sequence[Neighbor], truth: Sequence[Neighbor], k: int) -> float:
    """Percentage of the true top-``k`` distances found among ``returned``.

    Compared as distance multisets, so swapping tied identifiers does not
    count as a miss.
    """
    truth = truth[:k]
    if not truth:
        return 100.0
    hits = Counter(n.dist for n in returned[:k]) & Counter(n.dist for n in truth)
    return 100.0 * sum(hits.values()) / len(truth)


@dataclass
class MetricsReport:
    """One CSV row: a method evaluated at one ``k``."""

    method: str
    bits: int
    m: int
    k: int
    n: int
    queries: int
    pre_at_k: float
    mean_time_ms: float
    speedup: float
    mean_buckets: float
    mean_candidates: float
    storage_bytes: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> dict:
        return asdict(self)


TIMING_COLUMNS = ("mean_time_ms", "speedup")
