"""Vector datasets: TexMex ``.fvecs``/``.bvecs`` files and a seeded generator."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import ParseError

_PAYLOAD = {"fvecs": np.dtype("<f4"), "bvecs": np.dtype("u1")}


@dataclass
class VectorDataset:
    """``n`` row-major ``d``-dimensional float32 vectors."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {self.data.shape}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def _payload_dtype(kind: str) -> np.dtype:
    try:
        return _PAYLOAD[kind]
    except KeyError:
        raise ValueError(f"kind must be 'fvecs' or 'bvecs', got {kind!r}") from None


def parse_xvecs(raw: bytes, kind: str, limit: int | None = None) -> VectorDataset:
    """Parse records of ``<i32 d><d payload entries>``; all records share ``d``."""
    dtype = _payload_dtype(kind)
    if not raw:
        return VectorDataset(np.zeros((0, 0), dtype=np.float32))
    if len(raw) < 4:
        raise ParseError("truncated record header", 0)
    d = int(np.frombuffer(raw, dtype="<i4", count=1)[0])
    if d <= 0:
        raise ParseError(f"non-positive dimension {d}", 0)
    rec = 4 + d * dtype.itemsize
    n = len(raw) // rec
    if limit is not None:
        n = min(n, limit)
    whole = n * rec
    if (limit is None or n < limit) and len(raw) % rec:
        # Report the first bad header if one exists, else the truncated tail.
        headers = np.frombuffer(raw, dtype=np.uint8, count=whole).reshape(n, rec)[:, :4]
        bad = np.flatnonzero(headers.copy().view("<i4")[:, 0] != d)
        if len(bad):
            raise ParseError(f"record {bad[0]} has dimension mismatch (expected {d})", int(bad[0]) * rec)
        raise ParseError(f"truncated record: {len(raw) - whole} trailing bytes, record needs {rec}", whole)
    records = np.frombuffer(raw, dtype=np.uint8, count=whole).reshape(n, rec)
    dims = records[:, :4].copy().view("<i4")[:, 0]
    bad = np.flatnonzero(dims != d)
    if len(bad):
        raise ParseError(f"record {bad[0]} has dimension {dims[bad[0]]}, expected {d}", int(bad[0]) * rec)
    payload = records[:, 4:].copy().view(dtype).reshape(n, d)
    return VectorDataset(payload.astype(np.float32))


def read_xvecs(path: str | os.PathLike, kind: str, limit: int | None = None) -> VectorDataset:
    _payload_dtype(kind)
    if limit is not None:
        with open(path, "rb") as fh:
            head = fh.read(4)
            if len(head) == 4:
                d = int(np.frombuffer(head, dtype="<i4")[0])
                if d > 0:
                    fh.seek(0)
                    return parse_xvecs(fh.read(limit * (4 + d * _PAYLOAD[kind].itemsize)), kind, limit)
    with open(path, "rb") as fh:
        return parse_xvecs(fh.read(), kind, limit)


def write_xvecs(path: str | os.PathLike, data: np.ndarray, kind: str) -> None:
    dtype = _payload_dtype(kind)
    data = np.asarray(data)
    n, d = data.shape
    out = np.empty((n, 4 + d * dtype.itemsize), dtype=np.uint8)
    out[:, :4] = np.full((n, 1), d, dtype="<i4").view(np.uint8)
    out[:, 4:] = data.astype(dtype).view(np.uint8).reshape(n, -1)
    with open(path, "wb") as fh:
        fh.write(out.tobytes())


def synthetic(n: int, d: int, seed: int, *, clusters: int = 1000, spread: float = 1.5,
              n_queries: int = 0) -> tuple[VectorDataset, VectorDataset]:
    """Gaussian-mixture base vectors and queries drawn from the same mixture.

    Cluster centres are N(0, spread**2 I); each point adds N(0, I) noise to
    a uniformly chosen centre.  ``clusters=0`` gives isotropic N(0, I) data.
    """
    rng = np.random.default_rng(seed)
    total = n + n_queries
    if clusters > 0:
        centres = rng.standard_normal((clusters, d), dtype=np.float32) * np.float32(spread)
        points = centres[rng.integers(0, clusters, total)]
        points += rng.standard_normal((total, d), dtype=np.float32)
    else:
        points = rng.standard_normal((total, d), dtype=np.float32)
    return VectorDataset(points[:n]), VectorDataset(points[n:])
