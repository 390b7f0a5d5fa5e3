import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repnet.dataset import (
    ParseError,
    RatingDataset,
    RatingRangeError,
    RatingScale,
    dataset_stats,
    k_core_filter,
    parse_ratings,
    write_ratings,
)

from conftest import make_dataset


def test_scale_invariants():
    s = RatingScale(1, 5)
    assert s.delta_norm == pytest.approx(0.8)
    np.testing.assert_allclose(s.normalized_grid, [0.2, 0.4, 0.6, 0.8, 1.0])
    with pytest.raises(ValueError):
        RatingScale(0, 5)
    with pytest.raises(ValueError):
        RatingScale(5, 5)


def test_nearest_raw_ties_go_low():
    s = RatingScale(1, 5)
    assert s.nearest_raw(0.78) == 4
    assert s.nearest_raw(0.6) == 3
    assert s.nearest_raw(0.5) == 2  # halfway between 0.4 and 0.6
    assert s.nearest_raw(0.05) == 1


@pytest.mark.parametrize(
    "line, expected",
    [("u1,o1,5,100", 1.0), ("u1,o1,1,100", 0.2)],
)
def test_parse_normalizes_by_max(line, expected):
    d = parse_ratings(line.encode())
    assert list(d.records()) == [("u1", "o1", pytest.approx(expected), 100)]


def test_parse_latest_timestamp_wins():
    d = parse_ratings(b"u1,o1,3,100\nu1,o1,4,200\n")
    assert d.n_ratings == 1
    assert d.ratings[0] == pytest.approx(0.8)
    # order in the file does not matter
    d = parse_ratings(b"u1,o1,4,200\nu1,o1,3,100\n")
    assert d.ratings[0] == pytest.approx(0.8)


def test_parse_accepts_crlf_text_and_blank_lines():
    d = parse_ratings(io.StringIO("u1,o1,3,1\r\n\r\nu2,o1,2,5\r\n"))
    assert d.users == ("u1", "u2")
    assert d.n_ratings == 2


def test_parse_errors_report_line_numbers():
    with pytest.raises(ParseError) as exc:
        parse_ratings(b"u1,o1,3,1\nu2,o1,3\n")
    assert exc.value.lineno == 2
    with pytest.raises(ParseError):
        parse_ratings(b"u1,o1,x,1\n")
    with pytest.raises(ParseError):
        parse_ratings(b"u1,o1,3.5,1\n")
    with pytest.raises(RatingRangeError) as exc:
        parse_ratings(b"u1,o1,3,1\nu1,o2,6,1\n")
    assert exc.value.lineno == 2
    with pytest.raises(RatingRangeError):
        parse_ratings(b"u1,o1,0,1\n")


def test_roundtrip_through_csv(small):
    buf = io.StringIO()
    write_ratings(small, buf)
    assert parse_ratings(buf.getvalue().encode()) == small


def test_invariants(small):
    allowed = set(small.scale.normalized_grid.round(12))
    assert set(small.ratings.round(12)) <= allowed
    pairs = list(zip(small.user_index, small.item_index))
    assert len(pairs) == len(set(pairs))
    assert small.user_ratings("u1") == {"o1": 5, "o2": 3, "o3": 4}
    assert small.user_ratings("nobody") == {}


def test_normalization_preserves_order():
    d = make_dataset([("u", f"o{r}", r) for r in range(1, 6)])
    vals = [d.ratings[d.item_pos(f"o{r}")] for r in range(1, 6)]
    assert vals == sorted(vals) and len(set(vals)) == 5


def test_k_core_noop_cases(small):
    assert k_core_filter(small, 1) == small
    full = make_dataset([(u, o, 3) for u in ("a", "b") for o in ("x", "y")])
    assert k_core_filter(full, 2) == full


def test_k_core_cascade_to_empty():
    d = make_dataset([(u, o, 4) for u in ("u1", "u2", "u3") for o in ("o1", "o2")])
    out = k_core_filter(d, 3)
    assert out.n_ratings == 0 and out.users == () and out.items == ()


def test_k_core_users_only():
    d = make_dataset([("a", "x", 1), ("a", "y", 2), ("b", "x", 3)])
    out = k_core_filter(d, 2, users_only=True)
    assert out.users == ("a",) and out.n_ratings == 2


def test_k_core_rejects_bad_k(small):
    with pytest.raises(ValueError):
        k_core_filter(small, 0)


def _brute_core(rows, k):
    rows = set(rows)
    while True:
        ucount, ocount = {}, {}
        for u, o, _ in rows:
            ucount[u] = ucount.get(u, 0) + 1
            ocount[o] = ocount.get(o, 0) + 1
        keep = {r for r in rows if ucount[r[0]] >= k and ocount[r[1]] >= k}
        if keep == rows:
            return rows
        rows = keep


triples = st.lists(
    st.tuples(st.integers(0, 8), st.integers(0, 8), st.integers(1, 5)),
    max_size=60,
    unique_by=lambda t: (t[0], t[1]),
)


@settings(max_examples=150, deadline=None)
@given(triples, st.integers(1, 4))
def test_k_core_matches_brute_force_and_is_idempotent(rows, k):
    rows = [(f"u{u}", f"o{o}", r) for u, o, r in rows]
    d = make_dataset(rows)
    out = k_core_filter(d, k)
    assert {(u, o, int(round(v * 5))) for u, o, v, _ in out.records()} == _brute_core(rows, k)
    assert k_core_filter(out, k) == out
    # monotone in k
    bigger = k_core_filter(d, k + 1)
    assert set(bigger.raw_records()) <= set(out.raw_records())


def test_stats():
    empty = dataset_stats(RatingDataset.empty())
    assert (empty.n_users, empty.n_items, empty.n_ratings, empty.ratings_per_item) == (0, 0, 0, {})
    full = dataset_stats(make_dataset([(u, o, 3) for u in ("a", "b") for o in ("x", "y")]))
    assert (full.n_users, full.n_items, full.n_ratings) == (2, 2, 4)
    assert full.ratings_per_item == {"x": 2, "y": 2}
    assert full.count_histogram() == {2: 2}
    assert '"ratings": 4' in full.to_json()


def test_subset_users(small):
    sub = small.subset_users(["u3", "u1"])
    assert sub.users == ("u1", "u3")
    assert sub.items == ("o1", "o2", "o3")
    assert sub.n_ratings == 5
    assert sub.user_ratings("u3") == {"o2": 1, "o3": 5}
    assert small.subset_users(["u2"]).items == ("o1", "o2")
