"""Reputation-based ranking of items from user ratings, with user clustering
and spam-attack evaluation."""

from .attacks import AttackKind, AttackSpec, Direction, apply_attack, most_voted_item
from .clustering import (
    ClusterPartition,
    ClusterRankResult,
    SimilarityGraph,
    build_similarity_graph,
    cluster_rank,
    connected_components,
    multipartite_rank,
)
from .dataset import RatingDataset, RatingScale, dataset_stats, k_core_filter, parse_ratings, read_ratings
from .metrics import arithmetic_average, effectiveness, generalized_tau, kendall_tau, robustness
from .ranker import Aggregation, Decay, RankerConfig, bwa, iteration_bound, run_fixed_point
from .similarity import Measure, SimilarityConfig

__version__ = "0.1.0"

__all__ = [
    "Aggregation",
    "AttackKind",
    "AttackSpec",
    "ClusterPartition",
    "ClusterRankResult",
    "Decay",
    "Direction",
    "Measure",
    "RankerConfig",
    "RatingDataset",
    "RatingScale",
    "SimilarityConfig",
    "SimilarityGraph",
    "apply_attack",
    "arithmetic_average",
    "build_similarity_graph",
    "bwa",
    "cluster_rank",
    "connected_components",
    "dataset_stats",
    "effectiveness",
    "generalized_tau",
    "iteration_bound",
    "k_core_filter",
    "kendall_tau",
    "most_voted_item",
    "multipartite_rank",
    "parse_ratings",
    "read_ratings",
    "robustness",
    "run_fixed_point",
]
