"""Similarity-graph clustering of users and per-cluster ranking.

Pipeline: threshold pairwise user similarity into an undirected graph, take
its connected components as clusters, run the bipartite ranker inside every
cluster, then show unclassified users a size-weighted average of the
per-cluster rankings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .dataset import RatingDataset
from .ranker import FixedPointResult, RankerConfig, run_fixed_point
from .similarity import SimilarityConfig, pairwise_similarity

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    users: tuple[str, ...]
    adjacency: sp.csr_matrix
    alpha: float

    @classmethod
    def from_edges(cls, users: Sequence[str], edges: Iterable[tuple[int, int]], alpha: float = 0.0):
        users = tuple(users)
        pairs = np.array([(i, j) for i, j in edges if i != j], dtype=np.int64).reshape(-1, 2)
        n = len(users)
        a = sp.coo_matrix((np.ones(len(pairs), dtype=bool), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        a = ((a + a.T) > 0).tocsr()
        return cls(users, a, alpha)

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.nnz // 2)

    def edges(self) -> list[tuple[int, int]]:
        upper = sp.triu(self.adjacency, k=1).tocoo()
        return sorted(zip(upper.row.tolist(), upper.col.tolist()))

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i] : a.indptr[i + 1]]


@dataclass(frozen=True)
class ClusterPartition:
    """Disjoint user clusters ordered by their least user id."""

    components: tuple[tuple[str, ...], ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.components)

    def __len__(self) -> int:
        return len(self.components)

    def labels(self) -> dict[str, int]:
        return {u: k for k, comp in enumerate(self.components) for u in comp}

    def to_csv(self, stream: IO[str]) -> None:
        stream.write("user_id,cluster_id\n")
        for user, k in sorted(self.labels().items()):
            stream.write(f"{user},{k}\n")

    def refines(self, coarser: "ClusterPartition") -> bool:
        """True if every cluster here sits inside one cluster of ``coarser``."""
        outer = coarser.labels()
        return all(len({outer[u] for u in comp}) == 1 for comp in self.components)


def build_similarity_graph(
    d: RatingDataset, simcfg: SimilarityConfig = SimilarityConfig(), alpha: float = 0.8
) -> SimilarityGraph:
    """Edge between every user pair whose similarity is strictly above ``alpha``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    rows, cols, values = pairwise_similarity(d, simcfg)
    keep = values > alpha
    return SimilarityGraph.from_edges(d.users, zip(rows[keep], cols[keep]), alpha)


class UnionFind:
    """Disjoint sets over ``0..n-1`` with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def connected_components(g: SimilarityGraph) -> ClusterPartition:
    n = len(g.users)
    uf = UnionFind(n)
    upper = sp.triu(g.adjacency, k=1).tocoo()
    for i, j in zip(upper.row.tolist(), upper.col.tolist()):
        uf.union(i, j)
    groups: dict[int, list[str]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(g.users[i])
    comps = [tuple(sorted(members)) for members in groups.values()]
    comps.sort(key=lambda c: c[0])
    return ClusterPartition(tuple(comps))


@dataclass
class ClusterRanking:
    index: int
    users: tuple[str, ...]
    result: FixedPointResult

    @property
    def size(self) -> int:
        return len(self.users)

    @property
    def rankings(self) -> dict[str, float]:
        return self.result.state.ranking_map()

    @property
    def reputations(self) -> dict[str, float]:
        return self.result.state.reputation_map()


@dataclass
class ClusterRankResult:
    per_cluster: list[ClusterRanking]
    displayed: dict[str, float]
    skipped: list[int] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(c.result.converged for c in self.per_cluster)

    @property
    def iterations(self) -> int:
        return max((c.result.iterations for c in self.per_cluster), default=0)

    def reputations(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for c in self.per_cluster:
            out.update(c.reputations)
        return out

    def cluster_of(self, user: str) -> ClusterRanking | None:
        for c in self.per_cluster:
            if user in c.users:
                return c
        return None


def aggregate_displayed(per_cluster: Sequence[ClusterRanking], item: str) -> float | None:
    """Size-weighted mean of ``item``'s ranking over clusters that rated it.

    Returns None if no cluster contains a rater of ``item``.
    """
    terms = [(c.size, c.rankings[item]) for c in per_cluster if item in c.rankings]
    if not terms:
        return None
    return _weighted_mean(terms)


def _weighted_mean(terms: list[tuple[int, float]]) -> float:
    # a lone term is returned as is so a one-cluster run reproduces the ranker exactly
    if len(terms) == 1:
        return terms[0][1]
    return sum(n * r for n, r in terms) / sum(n for n, _ in terms)


def _aggregate_all(per_cluster: Sequence[ClusterRanking]) -> dict[str, float]:
    terms: dict[str, list[tuple[int, float]]] = {}
    for c in per_cluster:
        for item, r in c.rankings.items():
            terms.setdefault(item, []).append((c.size, r))
    return {item: _weighted_mean(terms[item]) for item in sorted(terms)}


def cluster_rank(
    d: RatingDataset,
    partition: ClusterPartition,
    cfg: RankerConfig = RankerConfig(),
    min_cluster_size: int = 1,
) -> ClusterRankResult:
    """Run the ranker inside each cluster and aggregate the displayed rankings."""
    per_cluster: list[ClusterRanking] = []
    skipped: list[int] = []
    for k, users in enumerate(partition.components):
        if len(users) < min_cluster_size:
            skipped.append(k)
            continue
        sub = d if len(users) == d.n_users else d.subset_users(users)
        if sub.n_ratings == 0:
            log.warning("cluster %d has no ratings; skipped", k)
            skipped.append(k)
            continue
        per_cluster.append(ClusterRanking(k, users, run_fixed_point(sub, cfg)))
    return ClusterRankResult(per_cluster, _aggregate_all(per_cluster), skipped)


@dataclass
class MultipartiteResult:
    graph: SimilarityGraph
    partition: ClusterPartition
    ranking: ClusterRankResult


def multipartite_rank(
    d: RatingDataset,
    simcfg: SimilarityConfig = SimilarityConfig(),
    alpha: float = 0.8,
    cfg: RankerConfig = RankerConfig(),
    min_cluster_size: int = 1,
) -> MultipartiteResult:
    """Cluster users by similarity and rank inside every cluster."""
    g = build_similarity_graph(d, simcfg, alpha)
    part = connected_components(g)
    return MultipartiteResult(g, part, cluster_rank(d, part, cfg, min_cluster_size))


def largest_cluster_ranking(
    result: ClusterRankResult, item: str, among: Iterable[str] | None = None
) -> float | None:
    """Ranking of ``item`` inside the biggest cluster that rated it.

    Cluster size counts only users in ``among`` when given (e.g. the clean,
    non-attacker users); ties go to the cluster with the lower index.
    """
    pool = set(among) if among is not None else None
    best, best_size = None, -1
    for c in result.per_cluster:
        r = c.rankings.get(item)
        if r is None:
            continue
        size = c.size if pool is None else sum(u in pool for u in c.users)
        if size > best_size:
            best, best_size = r, size
    return best
