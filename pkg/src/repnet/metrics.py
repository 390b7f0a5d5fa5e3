"""Rank agreement metrics: Kendall tau, cluster-weighted tau, effectiveness, robustness."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .dataset import RatingDataset


class UndefinedMetricError(ValueError):
    """The metric has no value for the given input (too few items, all ties)."""


def _align(x, y) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, Mapping) and isinstance(y, Mapping):
        common = sorted(x.keys() & y.keys())
        xa = np.array([x[k] for k in common], dtype=float)
        ya = np.array([y[k] for k in common], dtype=float)
    else:
        xa = np.asarray(x, dtype=float)
        ya = np.asarray(y, dtype=float)
        if xa.shape != ya.shape:
            raise ValueError(f"shape mismatch: {xa.shape} vs {ya.shape}")
    ok = np.isfinite(xa) & np.isfinite(ya)
    return xa[ok], ya[ok]


def _pair_counts(x: np.ndarray, y: np.ndarray, block: int = 2048) -> tuple[int, int, int, int, int]:
    """(concordant, discordant, tied in x only, tied in y only, tied in both)."""
    n = x.size
    conc = disc = tx = ty = txy = 0
    for start in range(0, n, block):
        xs, ys = x[start : start + block, None], y[start : start + block, None]
        sx = np.sign(xs - x[None, :])
        sy = np.sign(ys - y[None, :])
        # keep pairs (i, j) with j > i only
        idx = np.arange(start, min(start + block, n))[:, None]
        upper = np.arange(n)[None, :] > idx
        prod = (sx * sy)[upper]
        zx, zy = (sx == 0)[upper], (sy == 0)[upper]
        conc += int(np.count_nonzero(prod > 0))
        disc += int(np.count_nonzero(prod < 0))
        tx += int(np.count_nonzero(zx & ~zy))
        ty += int(np.count_nonzero(zy & ~zx))
        txy += int(np.count_nonzero(zx & zy))
    return conc, disc, tx, ty, txy


def kendall_tau(x, y, variant: str = "a") -> float:
    """Kendall rank correlation between two rankings.

    ``x`` and ``y`` are equal-length arrays (NaN entries dropped pairwise) or
    mappings keyed by item (intersected). With the default ``variant="a"``
    pairs tied in either vector count as neither concordant nor discordant:
    ``tau = (C - D) / (C + D)``. ``variant="b"`` gives tau-b.
    """
    xa, ya = _align(x, y)
    if xa.size < 2:
        raise UndefinedMetricError(f"need at least 2 common items, got {xa.size}")
    conc, disc, tx, ty, _ = _pair_counts(xa, ya)
    if variant == "a":
        if conc + disc == 0:
            raise UndefinedMetricError("every pair is tied")
        return (conc - disc) / (conc + disc)
    if variant == "b":
        denom = np.sqrt(float(conc + disc + tx) * float(conc + disc + ty))
        if denom == 0:
            raise UndefinedMetricError("a vector is constant")
        return (conc - disc) / denom
    raise ValueError(f"unknown variant {variant!r}")


def generalized_tau(sizes: Sequence[int], taus: Sequence[float | None]) -> float:
    """Size-weighted mean of per-cluster taus; undefined (None/NaN) terms drop out."""
    if len(sizes) != len(taus):
        raise ValueError("sizes and taus differ in length")
    num = den = 0.0
    for size, tau in zip(sizes, taus):
        if tau is None or not np.isfinite(tau):
            continue
        num += size * tau
        den += size
    if den == 0:
        raise UndefinedMetricError("no cluster has a defined tau")
    return num / den


def arithmetic_average(d: RatingDataset) -> dict[str, float]:
    """Mean normalized rating of every item."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for _, item, value, _ in d.records():
        sums[item] = sums.get(item, 0.0) + value
        counts[item] = counts.get(item, 0) + 1
    return {item: sums[item] / counts[item] for item in sorted(sums)}


def effectiveness(r: Mapping[str, float], d: RatingDataset) -> float:
    """Kendall tau of ``r`` against the arithmetic average of ``d``."""
    return kendall_tau(r, arithmetic_average(d))


def robustness(r_clean: Mapping[str, float], r_attacked: Mapping[str, float]) -> float:
    """Kendall tau between clean and attacked rankings over their common items.

    Pass displayed rankings for clustered runs, plain rankings otherwise.
    """
    return kendall_tau(r_clean, r_attacked)


def cluster_effectiveness(d: RatingDataset, result) -> float:
    """Cluster-weighted tau of each cluster's rankings against its own members' averages.

    ``result`` is a ``clustering.ClusterRankResult``. Clusters with fewer than
    two items, or only tied pairs, are left out of the weighted mean.
    """
    sizes, taus = [], []
    for c in result.per_cluster:
        sizes.append(c.size)
        try:
            taus.append(kendall_tau(c.rankings, arithmetic_average(d.subset_users(c.users))))
        except UndefinedMetricError:
            taus.append(None)
    return generalized_tau(sizes, taus)
