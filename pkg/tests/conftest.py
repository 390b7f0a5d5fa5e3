import numpy as np
import pytest

from repnet.dataset import RatingDataset, RatingScale


def make_dataset(rows, scale=RatingScale()):
    """Dataset from ``(user, item, raw)`` triples; timestamps are row order."""
    return RatingDataset.from_records(
        [(u, o, r, t) for t, (u, o, r) in enumerate(rows)], scale
    )


def random_dataset(rng, n_users=None, n_items=None, density=None, scale=RatingScale()):
    """Random dataset where every user rates at least one item."""
    n_users = n_users or int(rng.integers(2, 40))
    n_items = n_items or int(rng.integers(2, 20))
    density = density or float(rng.uniform(0.1, 0.7))
    rows = []
    for u in range(n_users):
        mask = rng.random(n_items) < density
        if not mask.any():
            mask[rng.integers(n_items)] = True
        for o in np.flatnonzero(mask):
            rows.append((f"u{u:04d}", f"o{o:04d}", int(rng.integers(scale.r_min, scale.r_max + 1))))
    return make_dataset(rows, scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20170427)


@pytest.fixture
def small():
    return make_dataset(
        [
            ("u1", "o1", 5), ("u1", "o2", 3), ("u1", "o3", 4),
            ("u2", "o1", 4), ("u2", "o2", 2),
            ("u3", "o2", 1), ("u3", "o3", 5),
        ]
    )
