"""Clean-versus-attacked ranking experiments over a sweep of attacker fractions.

A *method* is one way of producing the rankings a user sees:

* ``AA``: plain per-item average;
* ``BWA``: the iterative ranker over the whole bipartite graph;
* ``LD``/``KD``/``CD``: cluster users by that similarity measure, rank inside
  every cluster and display the size-weighted aggregate.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

from .attacks import AttackKind, AttackSpec, Direction, apply_attack, most_voted_item
from .clustering import ClusterRankResult, largest_cluster_ranking, multipartite_rank
from .dataset import RatingDataset
from .metrics import UndefinedMetricError, arithmetic_average, robustness
from .ranker import RankerConfig, run_fixed_point
from .similarity import Compressor, SimilarityConfig

log = logging.getLogger(__name__)

METHODS = ("AA", "BWA", "LD", "KD", "CD")
CLUSTERED = frozenset({"LD", "KD", "CD"})
DEFAULT_FRACTIONS = (0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75)


@dataclass(frozen=True)
class ExperimentConfig:
    ranker: RankerConfig = field(default_factory=RankerConfig)
    theta: int = 3
    compressor: Compressor = Compressor.ZLIB
    alpha: float = 0.8
    min_cluster_size: int = 1
    methods: tuple[str, ...] = METHODS
    attack: AttackKind = AttackKind.RANDOM_SPAM
    direction: Direction = Direction.NUKE
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    filler_count: int = 9
    poisson_lambda: float = 5.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "attack", AttackKind(self.attack))
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "compressor", Compressor(self.compressor))
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}, got {list(self.methods)}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")
        object.__setattr__(self, "fractions", tuple(sorted(set(float(f) for f in self.fractions))))
        for f in self.fractions:
            # AttackSpec checks the range
            self.attack_spec(f)

    def similarity(self, method: str) -> SimilarityConfig:
        return SimilarityConfig(measure=method, theta=self.theta, compressor=self.compressor)

    def attack_spec(self, fraction: float) -> AttackSpec:
        return AttackSpec(
            kind=self.attack,
            fraction=fraction,
            direction=self.direction,
            filler_count=self.filler_count,
            poisson_lambda=self.poisson_lambda,
            seed=self.seed,
        )

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass
class MethodRun:
    method: str
    displayed: dict[str, float]
    iterations: int
    converged: bool
    seconds: float
    clusters: ClusterRankResult | None = None


def run_method(d: RatingDataset, method: str, cfg: ExperimentConfig) -> MethodRun:
    t0 = time.perf_counter()
    if method == "AA":
        return MethodRun(method, arithmetic_average(d), 0, True, time.perf_counter() - t0)
    if method == "BWA":
        res = run_fixed_point(d, cfg.ranker)
        return MethodRun(
            method, res.state.ranking_map(), res.iterations, res.converged, time.perf_counter() - t0
        )
    mp = multipartite_rank(d, cfg.similarity(method), cfg.alpha, cfg.ranker, cfg.min_cluster_size)
    r = mp.ranking
    return MethodRun(method, r.displayed, r.iterations, r.converged, time.perf_counter() - t0, r)


@dataclass
class EvalRow:
    method: str
    fraction: float
    attackers: int
    robustness: float | None
    target: str
    target_clean: float | None
    target_attacked: float | None
    largest_clean: float | None
    largest_attacked: float | None
    iterations_clean: int
    iterations_attacked: int
    converged: bool
    seconds: float

    COLUMNS = (
        "method", "fraction", "attackers", "robustness", "target", "target_clean",
        "target_attacked", "largest_cluster_clean", "largest_cluster_attacked",
        "iterations_clean", "iterations_attacked", "converged",
    )

    def values(self) -> tuple:
        return (
            self.method, self.fraction, self.attackers, self.robustness, self.target,
            self.target_clean, self.target_attacked, self.largest_clean, self.largest_attacked,
            self.iterations_clean, self.iterations_attacked, self.converged,
        )


def _largest(run: MethodRun, target: str, clean_users) -> float | None:
    if run.clusters is None:
        return None
    return largest_cluster_ranking(run.clusters, target, among=clean_users)


def clean_runs(d: RatingDataset, cfg: ExperimentConfig) -> dict[str, MethodRun]:
    return {m: run_method(d, m, cfg) for m in cfg.methods}


def evaluate_attacks(
    d: RatingDataset, cfg: ExperimentConfig, clean: dict[str, MethodRun] | None = None
) -> Iterator[EvalRow]:
    """Yield one row per (method, fraction), methods outermost, fractions ascending.

    ``clean`` may hold precomputed clean runs (they do not depend on the seed).
    """
    if d.n_ratings == 0:
        raise ValueError("cannot evaluate attacks on an empty dataset")
    target = most_voted_item(d)
    clean_users = frozenset(d.users)
    cache = clean or {}
    for method in cfg.methods:
        clean = cache.get(method) or run_method(d, method, cfg)
        for fraction in cfg.fractions:
            spec = cfg.attack_spec(fraction)
            attacked_data = apply_attack(d, spec, clean.displayed)
            attacked = run_method(attacked_data, method, cfg) if attacked_data is not d else clean
            try:
                tau = robustness(clean.displayed, attacked.displayed)
            except UndefinedMetricError as exc:
                log.warning("robustness undefined for %s at %g: %s", method, fraction, exc)
                tau = None
            yield EvalRow(
                method=method,
                fraction=fraction,
                attackers=attacked_data.n_users - d.n_users,
                robustness=tau,
                target=target,
                target_clean=clean.displayed.get(target),
                target_attacked=attacked.displayed.get(target),
                largest_clean=_largest(clean, target, clean_users),
                largest_attacked=_largest(attacked, target, clean_users),
                iterations_clean=clean.iterations,
                iterations_attacked=attacked.iterations,
                converged=clean.converged and attacked.converged,
                seconds=attacked.seconds,
            )


def mean_over_seeds(
    d: RatingDataset, cfg: ExperimentConfig, seeds: Sequence[int], field_name: str
) -> dict[tuple[str, float], float]:
    """Average one numeric row field over attack seeds, keyed by (method, fraction)."""
    sums: dict[tuple[str, float], float] = {}
    base = clean_runs(d, cfg)
    for s in seeds:
        for row in evaluate_attacks(d, cfg.with_(seed=s), base):
            v = getattr(row, field_name)
            if v is None or not math.isfinite(v):
                raise UndefinedMetricError(f"{field_name} undefined for {row.method} at {row.fraction}")
            key = (row.method, row.fraction)
            sums[key] = sums.get(key, 0.0) + v / len(seeds)
    return sums
