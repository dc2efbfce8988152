import numpy as np
import pytest

from wham import BinaryCode, CodeArray, WeightModel


def random_weights(rng, b, *, scale=10.0):
    return WeightModel(rng.random((b, 2)) * scale)


def random_code(rng, b):
    return BinaryCode(int.from_bytes(rng.bytes((b + 7) // 8), "little") & ((1 << b) - 1), b)


def random_codes(rng, n, b):
    data = rng.integers(0, 256, size=(n, (b + 7) // 8), dtype=np.uint8)
    if b % 8:
        data[:, -1] &= (1 << (b % 8)) - 1
    return CodeArray(data, b)


def dist_multiset(neighbors):
    return sorted(x.dist for x in neighbors)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
