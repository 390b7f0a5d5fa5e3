"""Spam and attack injection into rating datasets.

Every generator only appends new attacker users and their ratings; original
ratings are never touched. Injected ratings carry timestamp 0.

Randomness uses numpy's PCG64. Each attacker draws from its own stream,
spawned in order from ``SeedSequence(spec.seed)``, so attacker ``k`` gets the
same ratings no matter how many attackers follow it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import RatingDataset

MAX_FRACTION = 0.75


class AttackKind(str, enum.Enum):
    RANDOM_SPAM = "random"
    LOVE_HATE = "love-hate"
    REPUTATION = "reputation"


class Direction(str, enum.Enum):
    PUSH = "push"
    NUKE = "nuke"


@dataclass(frozen=True)
class AttackSpec:
    """Parameters of one injection.

    ``fraction`` counts attackers relative to all users for random spam, and
    relative to the target item's raters for the targeted attacks.
    """

    kind: AttackKind = AttackKind.RANDOM_SPAM
    fraction: float = 0.0
    direction: Direction = Direction.NUKE
    filler_count: int = 9
    poisson_lambda: float = 5.0
    seed: int = 0
    id_prefix: str = "atk"

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not 0.0 <= self.fraction <= MAX_FRACTION:
            raise ValueError(f"fraction must be in [0, {MAX_FRACTION}], got {self.fraction}")
        if int(self.filler_count) != self.filler_count or self.filler_count < 1:
            raise ValueError(f"filler_count must be a positive integer, got {self.filler_count}")
        if self.poisson_lambda < 0:
            raise ValueError(f"poisson_lambda must be >= 0, got {self.poisson_lambda}")


def attacker_ids(d: RatingDataset, n: int, prefix: str = "atk") -> list[str]:
    """``n`` fresh user ids that sort together and collide with no existing user."""
    width = max(5, len(str(n)))
    while True:
        ids = [f"{prefix}{k:0{width}d}" for k in range(n)]
        if not any(d.has_user(u) for u in ids):
            return ids
        prefix = "_" + prefix


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def most_voted_item(d: RatingDataset) -> str:
    """Item with the most raters; ties go to the least item id."""
    if d.n_ratings == 0:
        raise ValueError("empty dataset has no most-voted item")
    # items are sorted and argmax returns the first maximum
    return d.items[int(np.argmax(d.item_counts()))]


def _extremes(d: RatingDataset, direction: Direction) -> tuple[int, int]:
    """(target rating, filler rating) in raw units."""
    lo, hi = d.scale.r_min, d.scale.r_max
    return (lo, hi) if direction is Direction.NUKE else (hi, lo)


def random_spam(d: RatingDataset, spec: AttackSpec) -> RatingDataset:
    """Noise users rating popularity-weighted random items uniformly on the grid."""
    n_spam = math.floor(spec.fraction * d.n_users)
    if n_spam == 0:
        return d
    counts = d.item_counts().astype(float)
    probs = counts / counts.sum()
    grid = d.scale.grid
    records = []
    for user, rng in zip(attacker_ids(d, n_spam, spec.id_prefix), _streams(spec.seed, n_spam)):
        n = min(1 + int(rng.poisson(spec.poisson_lambda)), d.n_items)
        chosen = rng.choice(d.n_items, size=n, replace=False, p=probs)
        ratings = rng.choice(grid, size=n)
        records.extend((user, d.items[o], int(r), 0) for o, r in zip(chosen, ratings))
    return d.with_records(records)


def _target_and_count(d: RatingDataset, spec: AttackSpec) -> tuple[str, int]:
    target = most_voted_item(d)
    n_raters = int(d.item_counts()[d.item_pos(target)])
    if d.n_items - 1 < spec.filler_count:
        raise ValueError(
            f"need {spec.filler_count} filler items besides the target, only {d.n_items - 1} exist"
        )
    return target, math.floor(spec.fraction * n_raters)


def love_hate(d: RatingDataset, spec: AttackSpec) -> RatingDataset:
    """Hit the most-voted item with one extreme and random fillers with the other."""
    target, n_att = _target_and_count(d, spec)
    if n_att == 0:
        return d
    target_r, filler_r = _extremes(d, spec.direction)
    t = d.item_pos(target)
    others = np.array([k for k in range(d.n_items) if k != t])
    records = []
    for user, rng in zip(attacker_ids(d, n_att, spec.id_prefix), _streams(spec.seed, n_att)):
        records.append((user, target, target_r, 0))
        fillers = rng.choice(others, size=spec.filler_count, replace=False)
        records.extend((user, d.items[o], filler_r, 0) for o in fillers)
    return d.with_records(records)


def popular_fillers(d: RatingDataset, target: str, count: int) -> list[str]:
    """The ``count`` most-rated items other than ``target``; ties by item id."""
    counts = d.item_counts()
    t = d.item_pos(target)
    order = sorted((k for k in range(d.n_items) if k != t), key=lambda k: (-counts[k], k))
    return [d.items[k] for k in order[:count]]


def reputation_attack(
    d: RatingDataset, spec: AttackSpec, displayed: Mapping[str, float]
) -> RatingDataset:
    """Earn reputation by echoing the displayed rankings of popular items, then hit the target.

    ``displayed`` is what an outsider sees: bipartite rankings, or the
    cluster-aggregated rankings of a clustered system.
    """
    target, n_att = _target_and_count(d, spec)
    if n_att == 0:
        return d
    target_r, _ = _extremes(d, spec.direction)
    fillers = popular_fillers(d, target, spec.filler_count)
    missing = [o for o in fillers if o not in displayed]
    if missing:
        raise KeyError(f"no displayed ranking for filler items {missing}")
    echo = {o: d.scale.nearest_raw(displayed[o]) for o in fillers}
    records = []
    for user in attacker_ids(d, n_att, spec.id_prefix):
        records.append((user, target, target_r, 0))
        records.extend((user, o, echo[o], 0) for o in fillers)
    return d.with_records(records)


def apply_attack(
    d: RatingDataset, spec: AttackSpec, displayed: Mapping[str, float] | None = None
) -> RatingDataset:
    if spec.kind is AttackKind.RANDOM_SPAM:
        return random_spam(d, spec)
    if spec.kind is AttackKind.LOVE_HATE:
        return love_hate(d, spec)
    if displayed is None:
        raise ValueError("reputation attack needs the displayed rankings")
    return reputation_attack(d, spec, displayed)
