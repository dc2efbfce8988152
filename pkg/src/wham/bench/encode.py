"""Random-hyperplane LSH encoding and query-side weight generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import BinaryCode, CodeArray, WeightModel
from ..errors import ConfigurationError, DimensionError
from .datasets import VectorDataset

WEIGHT_SCHEMES = ("magnitude", "uniform", "unit")


@dataclass
class EncodedDataset:
    """Codes plus the ``(b, d)`` hyperplanes that produced them."""

    codes: CodeArray
    hyperplanes: np.ndarray

    @property
    def b(self) -> int:
        return self.codes.b


def _pack(bits: np.ndarray) -> np.ndarray:
    return np.packbits(bits, axis=1, bitorder="little")


def lsh_encode(ds: VectorDataset, b: int, seed: int, *, chunk: int = 1 << 16) -> EncodedDataset:
    """Bit ``j`` of a code is 1 iff ``hyperplanes[j] . x >= 0``."""
    if b < 1:
        raise ConfigurationError(f"b must be positive, got {b}")
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((b, ds.d)).astype(np.float32)
    packed = np.empty((ds.n, (b + 7) // 8), dtype=np.uint8)
    for start in range(0, ds.n, chunk):
        proj = ds.data[start:start + chunk] @ planes.T
        packed[start:start + chunk] = _pack(proj >= 0)
    return EncodedDataset(CodeArray(packed, b), planes)


def encode_query(query_vec: np.ndarray, enc: EncodedDataset) -> tuple[BinaryCode, np.ndarray]:
    """The query's code and its raw projections."""
    query_vec = np.asarray(query_vec, dtype=np.float32)
    if query_vec.shape != (enc.hyperplanes.shape[1],):
        raise DimensionError(f"query has shape {query_vec.shape}, hyperplanes expect ({enc.hyperplanes.shape[1]},)")
    proj = enc.hyperplanes @ query_vec
    packed = _pack((proj >= 0)[None, :])[0]
    return BinaryCode.from_bytes(packed.tobytes(), enc.b), proj


def make_weights(query_vec: np.ndarray, enc: EncodedDataset, scheme: str = "magnitude",
                 seed: int = 0) -> tuple[BinaryCode, WeightModel]:
    """Encode a query and attach per-bit weights.

    ``magnitude`` charges ``|projection|`` for a mismatch on each bit, so bits
    far from their hyperplane are expensive to flip; ``uniform`` draws
    mismatch costs from U(0, 1); ``unit`` is plain Hamming distance.
    Matches always cost 0.
    """
    q, proj = encode_query(query_vec, enc)
    if scheme == "magnitude":
        costs = np.abs(proj)
    elif scheme == "uniform":
        costs = np.random.default_rng(seed).random(enc.b)
    elif scheme == "unit":
        return q, WeightModel.unit(enc.b)
    else:
        raise ConfigurationError(f"unknown weight scheme {scheme!r}; choose from {WEIGHT_SCHEMES}")
    return q, WeightModel.from_flip_costs(costs)
