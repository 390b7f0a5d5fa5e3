"""Iterative reputation-based ranking on the bipartite user/item graph.

Alternates two maps until the item rankings stop moving:

* ranking step: each item's ranking is the reputation-weighted mean of its
  ratings;
* reputation step: each user's reputation is one minus a decayed penalty
  on how far their ratings sit from the current rankings.

All vectors are numpy arrays aligned with ``RatingDataset.users`` (reputations)
and ``RatingDataset.items`` (rankings).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import RatingDataset, RatingScale

DENOMINATOR_FLOOR = 1e-9


class NumericalError(ArithmeticError):
    """Non-finite or degenerate values showed up during iteration."""


class Aggregation(str, enum.Enum):
    AVERAGE = "average"
    MAX = "max"
    MIN = "min"


class Decay(str, enum.Enum):
    CONSTANT = "constant"
    EXPONENTIAL = "exponential"
    LOGISTIC = "logistic"


class DenominatorGuard(str, enum.Enum):
    """How the ranking step protects its per-item weight sum.

    ``FLOOR`` clamps it below at a tiny constant, which only matters if
    reputations collapse. ``UNIT`` uses ``max(sum, 1)``, which keeps the map
    contracting for any penalty in ``[0, 1[`` at the price of shrinking the
    rankings of thinly rated items.
    """

    NONE = "none"
    FLOOR = "floor"
    UNIT = "unit"


@dataclass(frozen=True)
class RankerConfig:
    lam: float = 0.3
    p: int = 1
    aggregation: Aggregation = Aggregation.AVERAGE
    decay: Decay = Decay.CONSTANT
    upsilon: float = 0.5
    s: int = 5
    epsilon: float = 1e-9
    max_iters: int = 1000
    initial_reputation: float = 1.0
    guard: DenominatorGuard = DenominatorGuard.FLOOR

    def __post_init__(self):
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        object.__setattr__(self, "decay", Decay(self.decay))
        object.__setattr__(self, "guard", DenominatorGuard(self.guard))
        if not 0.0 <= self.lam < 1.0:
            raise ValueError(f"lam must be in [0, 1), got {self.lam}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be a positive integer, got {self.p}")
        if not 0.0 < self.upsilon < 1.0:
            raise ValueError(f"upsilon must be in (0, 1), got {self.upsilon}")
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"s must be a positive integer, got {self.s}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not 0.0 < self.initial_reputation <= 1.0:
            raise ValueError(
                f"initial_reputation must be in (0, 1], got {self.initial_reputation}"
            )

    def check_contraction(self, scale: RatingScale) -> None:
        """Refuse penalties above the proven contraction bound unless guarded."""
        bound = 1.0 / (1.0 + scale.delta_norm)
        if self.guard is not DenominatorGuard.UNIT and self.lam >= bound:
            raise ValueError(
                f"lam={self.lam} >= 1/(1+delta)={bound:.6g}; "
                "lower lam or enable guard='unit'"
            )

    def with_(self, **changes) -> "RankerConfig":
        return replace(self, **changes)


def bwa(lam: float = 0.3, **kwargs) -> RankerConfig:
    """Bipartite weighted average: average disagreement with constant decay."""
    return RankerConfig(lam=lam, aggregation=Aggregation.AVERAGE, decay=Decay.CONSTANT, **kwargs)


@dataclass
class RankState:
    users: tuple[str, ...]
    items: tuple[str, ...]
    reputations: np.ndarray
    rankings: np.ndarray
    iteration: int = 0

    def ranking_map(self) -> dict[str, float]:
        return {o: float(r) for o, r in zip(self.items, self.rankings) if np.isfinite(r)}

    def reputation_map(self) -> dict[str, float]:
        return {u: float(c) for u, c in zip(self.users, self.reputations) if np.isfinite(c)}


@dataclass
class FixedPointResult:
    state: RankState
    converged: bool
    iterations: int
    residuals: list[float] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (state, converged, iterations)
        return iter((self.state, self.converged, self.iterations))


def decay(kind, x, lam: float, upsilon: float = 0.5, s: int = 5):
    """Penalty scale as a function of the number of rated items ``x``.

    Works elementwise on arrays. Result lies in ``[0, lam]``.
    """
    kind = Decay(kind)
    x = np.asarray(x, dtype=float)
    if kind is Decay.CONSTANT:
        out = np.full_like(x, lam)
    elif kind is Decay.EXPONENTIAL:
        out = lam * (1.0 - np.exp(-x / 2.0))
    else:
        out = lam * (1.0 - (1.0 - upsilon) / (1.0 + np.exp(s - x)))
    return float(out) if out.ndim == 0 else out


def ranking_step(
    d: RatingDataset,
    c: np.ndarray,
    guard: DenominatorGuard = DenominatorGuard.FLOOR,
) -> np.ndarray:
    """Reputation-weighted average of every item's ratings.

    Items without raters come back as NaN.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (d.n_users,):
        raise ValueError(f"reputation vector has shape {c.shape}, expected ({d.n_users},)")
    if np.any(c < 0) or not np.any(c > 0):
        raise NumericalError("reputations must be non-negative and not all zero")
    w = c[d.user_index]
    num = np.bincount(d.item_index, weights=w * d.ratings, minlength=d.n_items)
    den = np.bincount(d.item_index, weights=w, minlength=d.n_items)
    rated = np.bincount(d.item_index, minlength=d.n_items) > 0
    guard = DenominatorGuard(guard)
    if guard is DenominatorGuard.FLOOR:
        den = np.maximum(den, DENOMINATOR_FLOOR)
    elif guard is DenominatorGuard.UNIT:
        den = np.maximum(den, 1.0)
    elif np.any(rated & (den == 0)):
        raise NumericalError("an item's raters all have zero reputation")
    r = np.full(d.n_items, np.nan)
    r[rated] = num[rated] / den[rated]
    return r


def reputation_step(d: RatingDataset, r: np.ndarray, cfg: RankerConfig) -> np.ndarray:
    """One minus the decayed aggregate disagreement of each user with ``r``.

    Users without ratings come back as NaN.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (d.n_items,):
        raise ValueError(f"ranking vector has shape {r.shape}, expected ({d.n_items},)")
    gaps = np.abs(d.ratings - r[d.item_index]) ** cfg.p
    if np.any(~np.isfinite(gaps)):
        raise NumericalError("ranking undefined for a rated item")
    counts = np.bincount(d.user_index, minlength=d.n_users)
    active = counts > 0
    if cfg.aggregation is Aggregation.AVERAGE:
        agg = np.bincount(d.user_index, weights=gaps, minlength=d.n_users)
        agg[active] /= counts[active]
    elif cfg.aggregation is Aggregation.MAX:
        agg = np.full(d.n_users, -np.inf)
        np.maximum.at(agg, d.user_index, gaps)
    else:
        agg = np.full(d.n_users, np.inf)
        np.minimum.at(agg, d.user_index, gaps)
    scale = decay(cfg.decay, counts, cfg.lam, cfg.upsilon, cfg.s)
    c = np.full(d.n_users, np.nan)
    c[active] = 1.0 - scale[active] * agg[active]
    return c


def run_fixed_point(d: RatingDataset, cfg: RankerConfig = RankerConfig()) -> FixedPointResult:
    """Iterate ranking and reputation updates until the rankings settle.

    ``iterations`` counts ranking updates after the first one; the loop stops
    as soon as ``max|r_new - r_old| < epsilon``. With ``lam=0`` that happens
    after exactly one iteration. ``residuals`` holds every measured change.
    """
    if d.n_ratings == 0:
        raise ValueError("cannot rank an empty dataset")
    cfg.check_contraction(d.scale)
    c = np.full(d.n_users, float(cfg.initial_reputation))
    r = ranking_step(d, c, cfg.guard)
    _check_finite(r, "rankings", 0)
    residuals: list[float] = []
    converged = False
    k = 0
    while k < cfg.max_iters:
        c = reputation_step(d, r, cfg)
        _check_finite(c, "reputations", k)
        r_new = ranking_step(d, c, cfg.guard)
        _check_finite(r_new, "rankings", k + 1)
        k += 1
        diff = float(np.max(np.abs(r_new - r)))
        residuals.append(diff)
        r = r_new
        if diff < cfg.epsilon:
            converged = True
            break
    state = RankState(d.users, d.items, c, r, k)
    return FixedPointResult(state, converged, k, residuals)


def _check_finite(v: np.ndarray, what: str, k: int) -> None:
    if not np.all(np.isfinite(v)):
        raise NumericalError(f"non-finite {what} at iteration {k}")


def iteration_bound(eta: float, epsilon: float) -> int:
    """Iterations a contraction with factor ``eta`` needs to reach ``epsilon``."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    # guard against log ratios like 2.9999999999999996
    return max(1, math.ceil(round(math.log(epsilon) / math.log(eta), 9)))

