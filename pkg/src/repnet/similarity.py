"""User similarity over shared-item rating profiles.

Three measures, all returning values where larger means more alike and 0
means the users share no rated item:

* ``LD`` (linear): confidence-weighted mean agreement on shared items;
* ``KD`` (Kolmogorov): closeness of the users' compressed profile lengths;
* ``CD`` (compression): one minus the normalized compression distance of the
  two profiles.

Profiles are serialized as ``<item>:<raw rating>;`` pairs in sorted item order.
"""

from __future__ import annotations

import bz2
import enum
import lzma
import zlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dataset import RatingDataset


class Measure(str, enum.Enum):
    LD = "LD"
    KD = "KD"
    CD = "CD"


class Compressor(str, enum.Enum):
    ZLIB = "zlib"
    BZ2 = "bz2"
    LZMA = "lzma"


_COMPRESS = {
    Compressor.ZLIB: lambda b: zlib.compress(b, 9),
    Compressor.BZ2: lambda b: bz2.compress(b, 9),
    Compressor.LZMA: lambda b: lzma.compress(b, format=lzma.FORMAT_ALONE, preset=9),
}


@dataclass(frozen=True)
class SimilarityConfig:
    measure: Measure = Measure.LD
    theta: int = 3
    compressor: Compressor = Compressor.ZLIB

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure(self.measure))
        object.__setattr__(self, "compressor", Compressor(self.compressor))
        if int(self.theta) != self.theta or self.theta < 1:
            raise ValueError(f"theta must be a positive integer, got {self.theta}")


def compressed_length(data: bytes, compressor=Compressor.ZLIB) -> int:
    """Length in bytes of ``data`` compressed at the maximum level."""
    return len(_COMPRESS[Compressor(compressor)](bytes(data)))


def encode_profile(d: RatingDataset, user: str) -> bytes:
    ratings = d.user_ratings(user)
    if not ratings:
        raise KeyError(f"user {user!r} has no ratings")
    return "".join(f"{item}:{ratings[item]};" for item in sorted(ratings)).encode("ascii")


def _shared_items(d: RatingDataset, u: str, v: str) -> tuple[dict, dict, list]:
    ru, rv = d.user_ratings(u), d.user_ratings(v)
    return ru, rv, sorted(ru.keys() & rv.keys())


def confidence(n_shared, theta: int):
    """1/theta up to ``theta`` shared items, 1 beyond."""
    return np.where(np.asarray(n_shared) <= theta, 1.0 / theta, 1.0)


def linear_distance(d: RatingDataset, u: str, v: str, theta: int = 3) -> float:
    ru, rv, shared = _shared_items(d, u, v)
    if not shared:
        return 0.0
    r_max, delta = d.scale.r_max, d.scale.delta_norm
    mean_gap = sum(abs(ru[o] / r_max - rv[o] / r_max) / delta for o in shared) / len(shared)
    return float(confidence(len(shared), theta)) * (1.0 - mean_gap)


def kolmogorov_distance(d: RatingDataset, u: str, v: str, compressor=Compressor.ZLIB) -> float:
    _, _, shared = _shared_items(d, u, v)
    if not shared:
        return 0.0
    cu = compressed_length(encode_profile(d, u), compressor)
    cv = compressed_length(encode_profile(d, v), compressor)
    return 1.0 / (1.0 + abs(cu - cv))


def compression_distance(d: RatingDataset, u: str, v: str, compressor=Compressor.ZLIB) -> float:
    """Clamped to [0, 1]; the pair is concatenated in user-id order."""
    _, _, shared = _shared_items(d, u, v)
    if not shared:
        return 0.0
    if v < u:
        u, v = v, u
    pu, pv = encode_profile(d, u), encode_profile(d, v)
    return _cd_value(
        compressed_length(pu, compressor),
        compressed_length(pv, compressor),
        compressed_length(pu + pv, compressor),
    )


def _cd_value(cu: int, cv: int, cuv: int) -> float:
    value = 1.0 - (cuv - min(cu, cv)) / max(cu, cv)
    return min(1.0, max(0.0, value))


def similarity(d: RatingDataset, u: str, v: str, cfg: SimilarityConfig = SimilarityConfig()) -> float:
    if cfg.measure is Measure.LD:
        return linear_distance(d, u, v, cfg.theta)
    if cfg.measure is Measure.KD:
        return kolmogorov_distance(d, u, v, cfg.compressor)
    return compression_distance(d, u, v, cfg.compressor)


# -- bulk evaluation -------------------------------------------------------


def _incidence(d: RatingDataset, values=None) -> sp.csr_matrix:
    data = np.ones(d.n_ratings) if values is None else values
    return sp.csr_matrix(
        (data, (d.user_index, d.item_index)), shape=(d.n_users, d.n_items)
    )


def candidate_pairs(d: RatingDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """User index pairs ``(i < j)`` sharing at least one item, with shared counts."""
    m = _incidence(d)
    shared = sp.triu(m @ m.T, k=1).tocoo()
    order = np.lexsort((shared.col, shared.row))
    return (
        shared.row[order].astype(np.int64),
        shared.col[order].astype(np.int64),
        np.rint(shared.data[order]).astype(np.int64),
    )


def _pair_lookup(mat: sp.spmatrix, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.asarray(mat.tocsr()[rows, cols]).ravel()


def _ld_bulk(d: RatingDataset, rows, cols, n_shared, theta: int) -> np.ndarray:
    # For integer ratings |a - b| = sum over thresholds t of |[a >= t] - [b >= t]|,
    # and for 0/1 indicators on shared items |x - y| = x*m' + m*y - 2*x*y.
    m = _incidence(d)
    gap_sum = sp.csr_matrix((d.n_users, d.n_users))
    for t in range(d.scale.r_min + 1, d.scale.r_max + 1):
        x = _incidence(d, (d.raw >= t).astype(float))
        x.eliminate_zeros()
        xm = x @ m.T
        gap_sum = gap_sum + xm + xm.T - 2 * (x @ x.T)
    gaps = np.rint(_pair_lookup(gap_sum, rows, cols))
    mean_gap = gaps / (n_shared * (d.scale.r_max - d.scale.r_min))
    return confidence(n_shared, theta) * (1.0 - mean_gap)


def profile_lengths(d: RatingDataset, compressor=Compressor.ZLIB) -> tuple[list[bytes], np.ndarray]:
    profiles = [encode_profile(d, u) for u in d.users]
    lengths = np.array([compressed_length(p, compressor) for p in profiles], dtype=np.int64)
    return profiles, lengths


def pairwise_similarity(
    d: RatingDataset, cfg: SimilarityConfig = SimilarityConfig()
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Similarity for every user pair sharing an item.

    Returns ``(rows, cols, values)`` with ``rows < cols`` indexing ``d.users``.
    Pairs not listed share no item and have similarity 0.
    """
    rows, cols, n_shared = candidate_pairs(d)
    if rows.size == 0:
        return rows, cols, np.empty(0)
    if cfg.measure is Measure.LD:
        return rows, cols, _ld_bulk(d, rows, cols, n_shared, cfg.theta)
    profiles, lengths = profile_lengths(d, cfg.compressor)
    if cfg.measure is Measure.KD:
        return rows, cols, 1.0 / (1.0 + np.abs(lengths[rows] - lengths[cols]))
    # users are sorted, so rows < cols is already user-id order
    values = np.array(
        [
            _cd_value(lengths[i], lengths[j], compressed_length(profiles[i] + profiles[j], cfg.compressor))
            for i, j in zip(rows, cols)
        ]
    )
    return rows, cols, values
