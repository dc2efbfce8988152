from fractions import Fraction

import numpy as np
import pytest

from wham import (
    BinaryCode,
    CapacityError,
    CodeArray,
    ConfigurationError,
    bucket_sharing_stats,
    build_full_table,
    build_multi_index,
    build_single_table,
    choose_m,
)

from conftest import random_codes


def test_full_table_small_example():
    codes = CodeArray.from_codes([BinaryCode.from_string("10"), BinaryCode.from_string("10"),
                                  BinaryCode.from_string("01")])
    t = build_full_table(codes)
    assert t.bucket(1).tolist() == [0, 1]
    assert t.bucket(2).tolist() == [2]
    assert t.bucket(0).tolist() == [] and t.bucket(3).tolist() == []


def test_full_table_empty():
    t = build_full_table(CodeArray(np.zeros((0, 1), dtype=np.uint8), 6))
    assert all(len(t.bucket(v)) == 0 for v in range(64))
    assert len(t.nonempty()) == 0


def test_full_table_bucket_sizes_sum_to_n(rng):
    codes = random_codes(rng, 10_000, 16)
    t = build_full_table(codes)
    assert sum(len(t.bucket(v)) for v in range(1 << 16)) == 10_000
    counts = np.bincount(np.array(codes.values), minlength=1 << 16)
    assert np.array_equal(np.diff(t.offsets), counts)


def test_full_table_capacity():
    with pytest.raises(CapacityError):
        build_full_table(CodeArray.from_ints([0], 32))


def test_multi_index_single_item():
    idx = build_multi_index([BinaryCode.from_string("1100")], 2)
    assert idx.bucket(0, 0b11).tolist() == [0]
    assert idx.bucket(1, 0b00).tolist() == [0]
    assert len(idx.tables[0]) == len(idx.tables[1]) == 1


def test_multi_index_m1_is_one_map(rng):
    codes = random_codes(rng, 500, 20)
    idx = build_multi_index(codes, 1)
    assert len(idx.tables) == 1
    expect = {}
    for i, v in enumerate(codes.values):
        expect.setdefault(v, []).append(i)
    assert idx.tables[0].as_dict() == expect


def test_multi_index_membership(rng):
    codes = random_codes(rng, 10_000, 32)
    idx = build_multi_index(codes, 2)
    for i in rng.integers(0, 10_000, 300):
        c = codes[int(i)]
        assert i in idx.bucket(0, c.substring(0, 16))
        assert i in idx.bucket(1, c.substring(1, 16))


@pytest.mark.parametrize("b,m", [(32, 2), (24, 3), (64, 4), (80, 1)])
def test_reconstruction_and_conservation(rng, b, m):
    codes = random_codes(rng, 400, b)
    idx = build_multi_index(codes, m)
    s = b // m
    rebuilt = [0] * len(codes)
    for j, table in enumerate(idx.tables):
        for key, ids in table.items():
            for i in ids:
                rebuilt[i] |= key << (j * s)
    assert rebuilt == codes.values
    assert sum(t.n_entries for t in idx.tables) == len(codes) * m
    single = build_single_table(codes, m)
    assert single.table.n_entries == len(codes) * m


def test_single_table_example():
    idx = build_single_table([BinaryCode.from_string("1100")], 2)
    assert idx.bucket(0, 0b11).tolist() == [0]
    assert idx.bucket(0, 0b00).tolist() == [0]


def test_single_table_duplicate_substrings():
    idx = build_single_table([BinaryCode(0b0101, 4)], 2)
    assert idx.table.get(0b01).tolist() == [0, 0]
    assert len(idx.table) == 1


def test_single_table_counts_against_multi(rng):
    # low-entropy codes share substring values across positions
    codes = CodeArray.from_ints([int(x) * 0x0101_0101 for x in rng.integers(0, 64, 2000)], 32)
    multi = build_multi_index(codes, 4)
    single = build_single_table(codes, 4)
    assert single.table.n_entries == sum(t.n_entries for t in multi.tables)
    assert len(single.table) <= sum(len(t) for t in multi.tables)
    keys = set()
    for t in multi.tables:
        keys |= set(t.as_dict())
    assert set(single.table.as_dict()) == keys


def test_bucket_ids_sorted(rng):
    codes = CodeArray.from_ints(rng.integers(0, 8, 300).tolist(), 8)
    for key, ids in build_multi_index(codes, 2).tables[0].items():
        assert np.all(np.diff(ids) > 0)


def test_wide_substrings_use_object_keys(rng):
    codes = random_codes(rng, 50, 160)
    idx = build_multi_index(codes, 2)
    c = codes[7]
    assert 7 in idx.bucket(1, c.substring(1, 80))


def test_bad_m():
    with pytest.raises(ConfigurationError):
        build_multi_index(CodeArray.from_ints([1], 10), 3)


def test_sharing_stats_m1(rng):
    stats = bucket_sharing_stats(random_codes(rng, 1000, 32), 1)
    assert stats.ratio_one == 100.0 and stats.ratio_shared == 0.0


def test_sharing_stats_counting_oracle(rng):
    codes = CodeArray.from_ints(rng.integers(0, 1 << 12, 300).tolist(), 12)
    stats = bucket_sharing_stats(codes, 3)
    positions = [set() for _ in range(3)]
    for c in codes:
        for j in range(3):
            positions[j].add(c.substring(j, 4))
    every = set().union(*positions)
    one = [k for k in every if sum(k in p for p in positions) == 1]
    assert (stats.n_one, stats.n_all) == (len(one), len(every))
    assert stats.fraction_one + (1 - stats.fraction_one) == Fraction(1)
    assert stats.ratio_one + stats.ratio_shared == pytest.approx(100.0, abs=1e-12)


@pytest.mark.parametrize("b,n,m", [(128, 10**6, 8), (128, 10**9, 4), (8, 4, 4), (64, 10**6, 4), (32, 10**3, 4), (32, 10**5, 2)])
def test_choose_m(b, n, m):
    assert choose_m(b, n) == m


def test_storage_bytes_positive(rng):
    codes = random_codes(rng, 100, 16)
    for idx in (build_full_table(codes), build_multi_index(codes, 2), build_single_table(codes, 2)):
        assert idx.storage_bytes() > 0
