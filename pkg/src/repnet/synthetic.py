"""Seeded synthetic rating data with planted preference groups."""

from __future__ import annotations

import numpy as np

from .dataset import RatingDataset, RatingScale


def two_mode_dataset(
    n_users: int = 500,
    n_items: int = 100,
    seed: int = 0,
    mean_ratings: float = 12.0,
    min_ratings: int = 5,
    majority: float = 0.6,
    noise: float = 0.25,
    polarized: float = 1.0,
    min_offset: float = 0.0,
    spread: float | None = 1.0,
    popularity_skew: float = 1.0,
    scale: RatingScale = RatingScale(),
) -> RatingDataset:
    """Users split into two taste groups that disagree on part of the catalogue.

    Each item has a latent score per group, between ``min_offset`` and
    ``spread`` away from the scale center (``spread=None`` allows the full
    scale). On a ``polarized`` share of items the second group's score mirrors
    the first one's around the center; elsewhere both groups agree. A user
    rates ``max(min_ratings, Poisson(mean_ratings))`` items drawn by Zipf-like
    popularity and reports the group score plus Gaussian ``noise``, rounded
    and clipped to the grid.

    The defaults give a sparse catalogue where most ratings sit in the middle
    of the scale, which is the regime used by the robustness experiments.
    User ids are ``u00000...`` and item ids ``o0000...``, so string order is
    numeric order.
    """
    rng = np.random.default_rng(seed)
    lo, hi = scale.r_min, scale.r_max
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0 if spread is None else min(spread, (hi - lo) / 2.0)
    base = center + rng.choice([-1.0, 1.0], size=n_items) * rng.uniform(
        min(min_offset, half), half, size=n_items
    )
    mirror = rng.random(n_items) < polarized
    score = np.vstack([base, np.where(mirror, 2 * center - base, base)])

    pop = 1.0 / (np.arange(n_items) + 5.0) ** popularity_skew
    pop = pop[rng.permutation(n_items)]
    pop /= pop.sum()

    group = (rng.random(n_users) >= majority).astype(int)
    records = []
    for u in range(n_users):
        n = int(min(n_items, max(min_ratings, rng.poisson(mean_ratings))))
        items = rng.choice(n_items, size=n, replace=False, p=pop)
        raw = np.clip(np.rint(score[group[u], items] + rng.normal(0.0, noise, size=n)), lo, hi)
        ts = rng.integers(1, 10**9, size=n)
        records.extend(
            (f"u{u:05d}", f"o{o:04d}", int(r), int(t)) for o, r, t in zip(items, raw, ts)
        )
    return RatingDataset.from_records(records, scale)
