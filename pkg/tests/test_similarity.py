import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repnet.dataset import RatingDataset
from repnet.similarity import (
    Compressor,
    SimilarityConfig,
    compressed_length,
    compression_distance,
    encode_profile,
    kolmogorov_distance,
    linear_distance,
    pairwise_similarity,
    similarity,
)

from conftest import make_dataset, random_dataset

ZLIB_EMPTY = 8  # zlib header + empty final block + adler32


def test_encode_profile():
    d = make_dataset([("u", "o2", 4), ("u", "o1", 5), ("v", "o1", 3)])
    assert encode_profile(d, "u") == b"o1:5;o2:4;"
    assert encode_profile(d, "v") == b"o1:3;"
    twin = make_dataset([("a", "o1", 5), ("a", "o2", 4), ("b", "o2", 4), ("b", "o1", 5)])
    assert encode_profile(twin, "a") == encode_profile(twin, "b")
    with pytest.raises(KeyError):
        encode_profile(d, "nobody")


def test_compressed_length_calibration():
    assert compressed_length(b"", Compressor.ZLIB) == ZLIB_EMPTY
    x = b"o1:5;o2:4;o3:3;" * 8
    assert compressed_length(x + x) < 2 * compressed_length(x)
    for n in (0, 10, 100, 1000):
        blob = os.urandom(n)
        assert compressed_length(blob) <= n + ZLIB_EMPTY + 5 * (n // 16384 + 1)
    for comp in Compressor:
        assert compressed_length(x, comp) == compressed_length(x, comp)


def test_linear_distance_examples():
    d = make_dataset(
        [("u", "a", 5), ("v", "b", 5)]
        + [("p", "x", 4), ("q", "x", 4)]
        + [("s", o, 3) for o in "klmn"] + [("t", o, 3) for o in "klmn"]
    )
    assert linear_distance(d, "u", "v", 3) == 0.0
    assert linear_distance(d, "p", "q", 3) == pytest.approx(1 / 3)
    assert linear_distance(d, "s", "t", 3) == pytest.approx(1.0)


def test_linear_distance_hand_value():
    # 4 shared items, raw gaps 0,1,2,4 -> mean normalized gap (7/4)/4 = 0.4375
    d = make_dataset(
        [("u", o, r) for o, r in zip("abcd", (1, 2, 3, 5))]
        + [("v", o, r) for o, r in zip("abcd", (1, 3, 5, 1))]
    )
    assert linear_distance(d, "u", "v", 3) == pytest.approx(1 - 0.4375)
    assert linear_distance(d, "u", "v", 4) == pytest.approx((1 - 0.4375) / 4)


def test_kolmogorov_distance_examples():
    d = make_dataset([("u", "a", 5), ("u", "b", 3), ("v", "a", 5), ("v", "b", 3), ("w", "z", 1)])
    assert kolmogorov_distance(d, "u", "v") == 1.0
    assert kolmogorov_distance(d, "u", "w") == 0.0
    # a pair whose compressed profile lengths differ by exactly 3
    rows = [("u", f"i{k:03d}", 1 + k % 5) for k in range(30)]
    base = make_dataset(rows)
    cu = compressed_length(encode_profile(base, "u"))
    for n in range(1, 30):
        cand = make_dataset(rows + [("v", f"i{k:03d}", 1 + k % 5) for k in range(n)])
        if cu - compressed_length(encode_profile(cand, "v")) == 3:
            assert kolmogorov_distance(cand, "u", "v") == pytest.approx(0.25)
            break
    else:
        pytest.fail("no profile length difference of 3 found")


def test_compression_distance_calibration():
    rows = [(u, f"i{k:03d}", 1 + (k * 7) % 5) for u in ("u", "v") for k in range(12)]
    d = make_dataset(rows + [("w", "zz", 2)])
    assert compression_distance(d, "u", "v") >= 0.8
    assert compression_distance(d, "u", "w") == 0.0
    # incompressible profiles with one shared item
    rnd = np.random.default_rng(7)
    ids = [bytes(rnd.integers(97, 123, 12)).decode() for _ in range(80)]
    noisy = make_dataset(
        [("x", "shared", 3), ("y", "shared", 4)]
        + [("x", i, int(rnd.integers(1, 6))) for i in ids[:40]]
        + [("y", i, int(rnd.integers(1, 6))) for i in ids[40:]]
    )
    assert compression_distance(noisy, "x", "y") <= 0.2


def test_cd_is_clamped_and_ordered_by_user_id(rng):
    for _ in range(10):
        d = random_dataset(rng, 12, 8, 0.5)
        for u in d.users[:4]:
            for v in d.users[4:8]:
                val = compression_distance(d, u, v)
                assert 0.0 <= val <= 1.0
                assert val == compression_distance(d, v, u)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_symmetry_range_and_zero_law(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, 10, 12, float(rng.uniform(0.05, 0.4)))
    sets = {u: set(d.user_ratings(u)) for u in d.users}
    for u in d.users:
        for v in d.users:
            if u >= v:
                continue
            ld, kd = linear_distance(d, u, v), kolmogorov_distance(d, u, v)
            assert ld == linear_distance(d, v, u) and kd == kolmogorov_distance(d, v, u)
            assert 0.0 <= ld <= 1.0 and 0.0 <= kd <= 1.0
            if not sets[u] & sets[v]:
                assert ld == kd == compression_distance(d, u, v) == 0.0
            else:
                assert kd > 0 and compression_distance(d, u, v) >= 0


def test_ld_is_zero_under_total_disagreement():
    # the converse of the zero law fails for LD: shared items, opposite extremes
    d = make_dataset([("u", "a", 1), ("v", "a", 5)])
    assert linear_distance(d, "u", "v") == 0.0


@pytest.mark.parametrize("offset", [1, -1])
@settings(max_examples=40, deadline=None)
@given(ratings=st.lists(st.integers(2, 4), min_size=1, max_size=8))
def test_ld_decreases_under_shift(offset, ratings):
    items = [f"o{k}" for k in range(len(ratings))]
    u_rows = [("u", o, r) for o, r in zip(items, ratings)]
    same = make_dataset(u_rows + [("v", o, r) for o, r in zip(items, ratings)])
    shifted = make_dataset(u_rows + [("v", o, r + offset) for o, r in zip(items, ratings)])
    assert linear_distance(shifted, "u", "v") < linear_distance(same, "u", "v")


@pytest.mark.parametrize("measure", ["LD", "KD", "CD"])
def test_bulk_matches_pairwise(rng, measure):
    cfg = SimilarityConfig(measure=measure, theta=3)
    for _ in range(8):
        d = random_dataset(rng, 25, 15, float(rng.uniform(0.1, 0.5)))
        rows, cols, vals = pairwise_similarity(d, cfg)
        got = {(d.users[i], d.users[j]): v for i, j, v in zip(rows, cols, vals)}
        for a in range(d.n_users):
            for b in range(a + 1, d.n_users):
                u, v = d.users[a], d.users[b]
                expected = similarity(d, u, v, cfg)
                assert got.get((u, v), 0.0) == pytest.approx(expected, abs=1e-12)
                if (u, v) in got:
                    assert set(d.user_ratings(u)) & set(d.user_ratings(v))


def test_bulk_on_tiny_inputs():
    d = make_dataset([("u", "a", 3), ("v", "b", 3)])
    rows, cols, vals = pairwise_similarity(d)
    assert rows.size == cols.size == vals.size == 0
    assert pairwise_similarity(RatingDataset.empty())[0].size == 0


def test_config_validation():
    with pytest.raises(ValueError):
        SimilarityConfig(theta=0)
    with pytest.raises(ValueError):
        SimilarityConfig(measure="XX")
