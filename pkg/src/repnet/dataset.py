"""Rating datasets: parsing, normalization, k-core filtering and summaries.

Ratings are stored as raw integers on the ``[r_min, r_max]`` grid and exposed
normalized by ``r_max``, so every normalized value lies in ``]0, 1]``.
"""

from __future__ import annotations

import io
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

import numpy as np


class DatasetError(ValueError):
    """Base class for dataset problems."""


class ParseError(DatasetError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class RatingRangeError(DatasetError):
    def __init__(self, lineno: int, rating: int, scale: "RatingScale"):
        super().__init__(
            f"line {lineno}: rating {rating} outside [{scale.r_min}, {scale.r_max}]"
        )
        self.lineno = lineno


@dataclass(frozen=True)
class RatingScale:
    r_min: int = 1
    r_max: int = 5

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max):
            raise ValueError(f"need 0 < r_min < r_max, got ({self.r_min}, {self.r_max})")

    @property
    def delta_norm(self) -> float:
        """Width of the normalized rating range, ``(r_max - r_min) / r_max``."""
        return (self.r_max - self.r_min) / self.r_max

    @property
    def grid(self) -> np.ndarray:
        """Allowed raw ratings."""
        return np.arange(self.r_min, self.r_max + 1)

    @property
    def normalized_grid(self) -> np.ndarray:
        return self.grid / self.r_max

    def normalize(self, raw):
        return np.asarray(raw) / self.r_max

    def nearest_raw(self, value: float) -> int:
        """Grid rating whose normalized value is closest to ``value``; ties go low."""
        grid = self.normalized_grid
        dist = np.abs(grid - value)
        # argmin returns the first minimum, i.e. the lower rating on ties
        return int(self.grid[np.argmin(dist)])


@dataclass(frozen=True, eq=False)
class RatingDataset:
    """Immutable sparse user x item rating set.

    Ratings are kept as parallel arrays sorted by (user index, item index).
    ``users`` and ``items`` are sorted identifier tuples; only users and items
    that appear in at least one rating are members.
    """

    scale: RatingScale
    users: tuple[str, ...]
    items: tuple[str, ...]
    user_index: np.ndarray
    item_index: np.ndarray
    raw: np.ndarray
    timestamps: np.ndarray
    _user_pos: dict = field(init=False, repr=False, compare=False)
    _item_pos: dict = field(init=False, repr=False, compare=False)
    _values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("user_index", "item_index", "raw", "timestamps"):
            arr = getattr(self, name)
            arr.setflags(write=False)
        object.__setattr__(self, "_user_pos", {u: k for k, u in enumerate(self.users)})
        object.__setattr__(self, "_item_pos", {o: k for k, o in enumerate(self.items)})
        values = self.raw / self.scale.r_max
        values.setflags(write=False)
        object.__setattr__(self, "_values", values)

    @classmethod
    def from_records(
        cls,
        records: Iterable[tuple[str, str, int, int]],
        scale: RatingScale = RatingScale(),
    ) -> "RatingDataset":
        """Build from ``(user, item, raw_rating, timestamp)`` tuples.

        Duplicate (user, item) pairs keep the record with the latest timestamp;
        on equal timestamps the later record wins.
        """
        latest: dict[tuple[str, str], tuple[int, int]] = {}
        for user, item, rating, ts in records:
            key = (str(user), str(item))
            prev = latest.get(key)
            if prev is None or ts >= prev[1]:
                latest[key] = (int(rating), int(ts))
        return cls._from_dedup(latest, scale)

    @classmethod
    def _from_dedup(cls, latest: dict, scale: RatingScale) -> "RatingDataset":
        users = tuple(sorted({u for u, _ in latest}))
        items = tuple(sorted({o for _, o in latest}))
        upos = {u: k for k, u in enumerate(users)}
        opos = {o: k for k, o in enumerate(items)}
        n = len(latest)
        ui = np.empty(n, dtype=np.int64)
        oi = np.empty(n, dtype=np.int64)
        raw = np.empty(n, dtype=np.int64)
        ts = np.empty(n, dtype=np.int64)
        for k, ((u, o), (r, t)) in enumerate(latest.items()):
            ui[k], oi[k], raw[k], ts[k] = upos[u], opos[o], r, t
        if n and (raw.min() < scale.r_min or raw.max() > scale.r_max):
            raise DatasetError(f"ratings outside [{scale.r_min}, {scale.r_max}]")
        order = np.lexsort((oi, ui))
        return cls(scale, users, items, ui[order], oi[order], raw[order], ts[order])

    @classmethod
    def empty(cls, scale: RatingScale = RatingScale()) -> "RatingDataset":
        z = np.empty(0, dtype=np.int64)
        return cls(scale, (), (), z, z.copy(), z.copy(), z.copy())

    def __eq__(self, other):
        if not isinstance(other, RatingDataset):
            return NotImplemented
        return (
            self.scale == other.scale
            and self.users == other.users
            and self.items == other.items
            and np.array_equal(self.user_index, other.user_index)
            and np.array_equal(self.item_index, other.item_index)
            and np.array_equal(self.raw, other.raw)
            and np.array_equal(self.timestamps, other.timestamps)
        )

    __hash__ = None

    # -- basic views -----------------------------------------------------

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_ratings(self) -> int:
        return int(self.raw.shape[0])

    def __len__(self) -> int:
        return self.n_ratings

    @property
    def ratings(self) -> np.ndarray:
        """Normalized ratings aligned with ``user_index``/``item_index``."""
        return self._values

    def user_pos(self, user: str) -> int:
        return self._user_pos[user]

    def item_pos(self, item: str) -> int:
        return self._item_pos[item]

    def has_user(self, user: str) -> bool:
        return user in self._user_pos

    def has_item(self, item: str) -> bool:
        return item in self._item_pos

    def records(self) -> Iterator[tuple[str, str, float, int]]:
        """Yield ``(user, item, normalized_rating, timestamp)`` in canonical order."""
        vals = self.ratings
        for k in range(self.n_ratings):
            yield (
                self.users[self.user_index[k]],
                self.items[self.item_index[k]],
                float(vals[k]),
                int(self.timestamps[k]),
            )

    def raw_records(self) -> Iterator[tuple[str, str, int, int]]:
        for k in range(self.n_ratings):
            yield (
                self.users[self.user_index[k]],
                self.items[self.item_index[k]],
                int(self.raw[k]),
                int(self.timestamps[k]),
            )

    def user_ratings(self, user: str) -> dict[str, int]:
        """Raw ratings of one user keyed by item id."""
        if user not in self._user_pos:
            return {}
        u = self._user_pos[user]
        lo, hi = np.searchsorted(self.user_index, [u, u + 1])
        return {self.items[o]: int(r) for o, r in zip(self.item_index[lo:hi], self.raw[lo:hi])}

    def item_counts(self) -> np.ndarray:
        """Number of raters per item, aligned with ``items``."""
        return np.bincount(self.item_index, minlength=self.n_items)

    def user_counts(self) -> np.ndarray:
        return np.bincount(self.user_index, minlength=self.n_users)

    # -- derived datasets ------------------------------------------------

    def _select(self, mask: np.ndarray) -> "RatingDataset":
        # Subsetting keeps (user, item) order, and the monotone index remap below
        # preserves it, so no re-sort is needed.
        ui, oi = self.user_index[mask], self.item_index[mask]
        kept_u, new_ui = np.unique(ui, return_inverse=True)
        kept_o, new_oi = np.unique(oi, return_inverse=True)
        return RatingDataset(
            self.scale,
            tuple(self.users[k] for k in kept_u),
            tuple(self.items[k] for k in kept_o),
            new_ui.astype(np.int64),
            new_oi.astype(np.int64),
            self.raw[mask].copy(),
            self.timestamps[mask].copy(),
        )

    def subset_users(self, users: Iterable[str]) -> "RatingDataset":
        """Sub-dataset induced by ``users``: their ratings on every item they rated."""
        keep = np.zeros(self.n_users, dtype=bool)
        for u in users:
            pos = self._user_pos.get(u)
            if pos is not None:
                keep[pos] = True
        return self._select(keep[self.user_index])

    def with_records(self, records: Iterable[tuple[str, str, int, int]]) -> "RatingDataset":
        """Return a new dataset with extra raw records appended (dedup rules apply)."""
        return RatingDataset.from_records(list(self.raw_records()) + list(records), self.scale)

    def to_csv(self, stream: IO[str]) -> None:
        write_ratings(self, stream)


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    for line in source:
        if isinstance(line, (bytes, bytearray)):
            line = line.decode("utf-8")
        yield line


def parse_ratings(source, scale: RatingScale = RatingScale()) -> RatingDataset:
    """Parse ``user,item,rating,timestamp`` lines (no header, UTF-8, LF or CRLF).

    ``source`` may be bytes, a binary or text stream, or any iterable of lines.
    Blank lines are skipped.
    """
    records = []
    for lineno, line in enumerate(_iter_lines(source), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(lineno, f"expected 4 comma-separated fields, got {len(parts)}")
        user, item, rating_s, ts_s = (p.strip() for p in parts)
        if not user or not item:
            raise ParseError(lineno, "empty user or item id")
        try:
            rating_f = float(rating_s)
            ts = int(float(ts_s))
        except ValueError:
            raise ParseError(lineno, f"non-numeric rating or timestamp in {line!r}") from None
        if not rating_f.is_integer():
            raise ParseError(lineno, f"rating {rating_s!r} is not an integer")
        rating = int(rating_f)
        if not scale.r_min <= rating <= scale.r_max:
            raise RatingRangeError(lineno, rating, scale)
        records.append((user, item, rating, ts))
    return RatingDataset.from_records(records, scale)


def read_ratings(path, scale: RatingScale = RatingScale()) -> RatingDataset:
    with open(path, "rb") as fh:
        return parse_ratings(fh, scale)


def write_ratings(d: RatingDataset, stream: IO[str]) -> None:
    """Write raw records in the same format ``parse_ratings`` reads."""
    for user, item, raw, ts in d.raw_records():
        stream.write(f"{user},{item},{raw},{ts}\n")


def k_core_filter(d: RatingDataset, k: int, users_only: bool = False) -> RatingDataset:
    """Peel users (and items, unless ``users_only``) with fewer than ``k`` ratings.

    Iterates to the fixed point, so the result is the maximal sub-dataset in
    which every remaining user (and item) keeps at least ``k`` ratings.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    keep = np.ones(d.n_ratings, dtype=bool)
    while True:
        ucount = np.bincount(d.user_index[keep], minlength=d.n_users)
        new_keep = keep & (ucount[d.user_index] >= k)
        if not users_only:
            ocount = np.bincount(d.item_index[new_keep], minlength=d.n_items)
            new_keep &= ocount[d.item_index] >= k
        if np.array_equal(new_keep, keep):
            break
        keep = new_keep
    if keep.all():
        return d
    return d._select(keep)


@dataclass(frozen=True)
class DatasetStats:
    n_users: int
    n_items: int
    n_ratings: int
    ratings_per_item: dict[str, int]

    def count_histogram(self) -> dict[int, int]:
        """Number of items per rater count."""
        return dict(sorted(Counter(self.ratings_per_item.values()).items()))

    def to_json(self) -> str:
        return json.dumps(
            {
                "users": self.n_users,
                "items": self.n_items,
                "ratings": self.n_ratings,
                "ratings_per_item": self.ratings_per_item,
            },
            indent=2,
            sort_keys=True,
        )

    def csv_rows(self) -> Sequence[tuple[str, int]]:
        return [("users", self.n_users), ("items", self.n_items), ("ratings", self.n_ratings)]


def dataset_stats(d: RatingDataset) -> DatasetStats:
    counts = d.item_counts()
    return DatasetStats(
        d.n_users,
        d.n_items,
        d.n_ratings,
        {item: int(c) for item, c in zip(d.items, counts)},
    )
