"""
Graph-based QoS prediction and accuracy-diversity top-K selection.

For a target user, every service the user never invoked is a candidate. Its
QoS is predicted as the mean of the user's observed values over the
candidate's graph neighbours. A list K of candidates is scored by

    F(K)  = Acc(K) + lam * (alpha(K) + xi * beta(K))
    F'(K) = (Acc(K) + lam * alpha(K)) / 2 + lam * xi * beta(K)

where Acc sums predicted QoS, alpha is the expansion ratio of K in the graph
and beta sums the Jaccard dissimilarity over unordered pairs of K. Greedily
maximising F' yields a list whose F is at least half the optimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .exceptions import EmptyCandidatesError, SearchSpaceTooLarge
from .federation import PlatformDataset
from .graph import SimilarityGraph, expansion_ratio
from .rng import make_rng


@dataclass(frozen=True)
class RecommendationQuery:
    """Who to recommend to and how to trade accuracy against diversity.

    ``user`` is the global user id; it must belong to platform ``platform_id``.
    """

    user: int
    platform_id: int
    k: int = 5
    lam: float = 0.1
    xi: float = 0.3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if self.lam < 0 or self.xi < 0:
            raise ValueError(f"lambda and xi must be non-negative, got {self.lam}, {self.xi}")


def jaccard_dissimilarity(a, b) -> float:
    """1 - |both non-zero| / |at least one non-zero|; 0 when both vectors are all-zero."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("vectors must have at least one entry")
    nz_a, nz_b = a != 0, b != 0
    both = int(np.count_nonzero(nz_a & nz_b))
    union = a.size - int(np.count_nonzero(~nz_a & ~nz_b))
    if union == 0:
        return 0.0
    return 1.0 - both / union


def predict_qos(g: SimilarityGraph, platform: PlatformDataset, user: int, service: int) -> float:
    """Mean of the user's observed QoS over graph neighbours of ``service`` (0 if none)."""
    col = platform.qos[:, platform.local_index(user)]
    if col[service] != 0:
        raise ValueError(f"service {service} is already rated by user {user}")
    values = col[g.neighbors(service)]
    values = values[values != 0]
    if values.size == 0:
        return 0.0
    return float(values.mean())


@dataclass(eq=False)
class CandidatePool:
    """Unrated services of one target user, with their predicted QoS.

    ``candidates`` is sorted ascending and ``predicted`` / ``neighbor_counts``
    are aligned with it.
    """

    graph: SimilarityGraph
    platform: PlatformDataset
    user: int
    candidates: np.ndarray
    predicted: np.ndarray
    neighbor_counts: np.ndarray

    @cached_property
    def user_col(self) -> int:
        return self.platform.local_index(self.user)

    @cached_property
    def _position(self) -> dict[int, int]:
        return {int(s): k for k, s in enumerate(self.candidates)}

    def __len__(self):
        return len(self.candidates)

    def __contains__(self, service):
        return int(service) in self._position

    def positions(self, subset: Iterable[int]) -> list[int]:
        try:
            return [self._position[int(s)] for s in subset]
        except KeyError as exc:
            raise ValueError(f"service {exc.args[0]} is not a candidate for user {self.user}") from None

    def prediction(self, service: int) -> float:
        return float(self.predicted[self.positions([service])[0]])

    def neighbor_set(self, service: int) -> frozenset[int]:
        """Graph neighbours of ``service`` that the target user has rated."""
        self.positions([service])
        col = self.platform.qos[:, self.user_col]
        nbrs = self.graph.neighbors(service)
        return frozenset(nbrs[col[nbrs] != 0].tolist())

    def vector(self, service: int) -> np.ndarray:
        """QoS column of ``service`` with the target user's entry replaced by its prediction."""
        v = self.platform.qos[service].copy()
        v[self.user_col] = self.prediction(service)
        return v

    @cached_property
    def neighbor_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened graph neighbours of every candidate, see :meth:`SimilarityGraph.neighbor_lists`."""
        return self.graph.neighbor_lists(self.candidates)

    @cached_property
    def support(self) -> np.ndarray:
        """Non-zero pattern of :meth:`vector` for every candidate, shape (n, N_r)."""
        s = self.platform.qos[self.candidates] != 0
        s[:, self.user_col] = self.predicted != 0
        return s

    def restrict(self, services: Iterable[int]) -> "CandidatePool":
        keep = np.sort(np.asarray(self.positions(set(services)), dtype=np.int64))
        return CandidatePool(
            graph=self.graph,
            platform=self.platform,
            user=self.user,
            candidates=self.candidates[keep],
            predicted=self.predicted[keep],
            neighbor_counts=self.neighbor_counts[keep],
        )


def build_pool(g: SimilarityGraph, platform: PlatformDataset, user: int) -> CandidatePool:
    if g.n_vertices != platform.n_services:
        raise ValueError(
            f"graph has {g.n_vertices} vertices but platform covers {platform.n_services} services"
        )
    col = platform.qos[:, platform.local_index(user)]
    candidates = np.flatnonzero(col == 0)
    n, m = candidates.size, g.n_vertices
    volume = int(g.indptr[candidates + 1].sum() - g.indptr[candidates].sum())
    table = None
    if 4 * volume > n * m:
        # dense neighbourhoods: contiguous adjacency rows beat the list gather
        rated = col != 0
        counts = np.empty(n, dtype=np.int64)
        sums = np.empty(n)
        for lo in range(0, n, 32):
            rows = g.adjacency[candidates[lo:lo + 32]]
            counts[lo:lo + 32] = np.count_nonzero(rows & rated, axis=1)
            sums[lo:lo + 32] = np.where(rows, col, 0.0).sum(axis=1)
    else:
        table = flat, owner = g.neighbor_lists(candidates)
        values = col[flat]
        counts = np.bincount(owner, weights=values != 0, minlength=n).astype(np.int64)
        sums = np.bincount(owner, weights=values, minlength=n)
    predicted = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    pool = CandidatePool(g, platform, int(user), candidates, predicted, counts)
    if table is not None:
        pool.neighbor_table = table
    return pool


def accuracy(pool: CandidatePool, subset: Iterable[int]) -> float:
    return float(sum(pool.predicted[k] for k in pool.positions(subset)))


def direct_diversity(pool: CandidatePool, subset: Iterable[int]) -> float:
    """Jaccard dissimilarity summed over unordered pairs, each pair counted once."""
    members = sorted(set(int(s) for s in subset))
    pool.positions(members)
    vectors = {s: pool.vector(s) for s in members}
    return float(
        sum(jaccard_dissimilarity(vectors[a], vectors[b]) for a, b in itertools.combinations(members, 2))
    )


def phi_prime(g: SimilarityGraph, pool: CandidatePool, subset, lam: float) -> float:
    """Monotone submodular part of the objective: Acc + lam * alpha."""
    subset = list(subset)
    return accuracy(pool, subset) + lam * expansion_ratio(g, subset)


def objective_F(g: SimilarityGraph, pool: CandidatePool, subset, lam: float, xi: float) -> float:
    subset = list(subset)
    alpha = expansion_ratio(g, subset)
    return accuracy(pool, subset) + lam * (alpha + xi * direct_diversity(pool, subset))


def surrogate_Fprime(g: SimilarityGraph, pool: CandidatePool, subset, lam: float, xi: float) -> float:
    subset = list(subset)
    alpha = expansion_ratio(g, subset)
    return 0.5 * (accuracy(pool, subset) + lam * alpha) + lam * xi * direct_diversity(pool, subset)


@dataclass(frozen=True)
class TraceStep:
    service_id: int
    f_prime: float
    acc: float
    alpha: float
    beta: float


@dataclass
class RecommendationList:
    query: RecommendationQuery
    services: list[int]
    predicted: list[float]
    trace: list[TraceStep]
    truncated: bool = False
    pool_size: int = 0

    CSV_HEADER = "rank,service_id,predicted_qos,F_prime,acc,alpha,beta"

    def to_csv(self) -> str:
        rows = [self.CSV_HEADER]
        for rank, (step, pred) in enumerate(zip(self.trace, self.predicted), start=1):
            rows.append(
                f"{rank},{step.service_id},{pred:.10g},{step.f_prime:.10g},"
                f"{step.acc:.10g},{step.alpha:.10g},{step.beta:.10g}"
            )
        return "\n".join(rows) + "\n"

    def summary(self) -> dict:
        q = self.query
        return {
            "user": q.user,
            "platform": q.platform_id,
            "k": q.k,
            "lambda": q.lam,
            "xi": q.xi,
            "returned": len(self.services),
            "pool_size": self.pool_size,
            "truncated": self.truncated,
        }


def _jaccard_to(support: np.ndarray, sizes: np.ndarray, row: int) -> np.ndarray:
    """Jaccard dissimilarity of every candidate to candidate ``row``."""
    inter = support @ support[row]
    union = sizes + sizes[row] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, 1.0 - inter / np.maximum(union, 1), 0.0)


def _refresh_gain(g, pool, gain, deg, slot, covered, fresh, delta):
    """Update |N[i] \\ covered| per candidate after ``delta`` became covered.

    Three equivalent walks; the cheapest one by edge count is used: lists of
    the newly covered vertices, the candidates' own lists, or lists of the
    vertices still uncovered (a full recount).
    """
    n = len(gain)
    uncovered = np.flatnonzero(~covered)
    costs = (int(deg[delta].sum()), int(deg[pool.candidates].sum()), int(deg[uncovered].sum()))
    path = int(np.argmin(costs))
    if path == 0:
        touched, _ = g.neighbor_lists(delta)
        hit = slot[np.concatenate((touched, delta))]
        return gain - np.bincount(hit[hit >= 0], minlength=n)
    if path == 1:
        nbr_flat, nbr_owner = pool.neighbor_table
        lost = np.bincount(nbr_owner, weights=fresh[nbr_flat], minlength=n).astype(np.int64)
        return gain - lost - fresh[pool.candidates]
    touched, _ = g.neighbor_lists(uncovered)
    hit = slot[np.concatenate((touched, uncovered))]
    return np.bincount(hit[hit >= 0], minlength=n)


def greedy_topk(
    g: SimilarityGraph,
    platform: PlatformDataset,
    query: RecommendationQuery,
    pool: CandidatePool | None = None,
) -> RecommendationList:
    """Select up to ``query.k`` candidates by repeatedly adding the argmax of F'.

    Ties go to the lowest service id. When fewer than k candidates exist the
    whole pool is returned and ``truncated`` is set.

    Raises:
        EmptyCandidatesError: if the user has rated every service.
    """
    if platform.platform_id != query.platform_id:
        raise ValueError(f"query targets platform {query.platform_id}, got platform {platform.platform_id}")
    if pool is None:
        pool = build_pool(g, platform, query.user)
    n = len(pool)
    if n == 0:
        raise EmptyCandidatesError(f"user {query.user} has no unrated services on platform {query.platform_id}")
    k = min(query.k, n)
    lam, xi = query.lam, query.xi
    m = g.n_vertices
    cand = pool.candidates
    pred = pool.predicted
    support = pool.support.astype(np.float32)
    sizes = support.sum(axis=1)

    deg = np.diff(g.indptr)
    slot = np.full(m, -1, dtype=np.int64)
    slot[cand] = np.arange(n)

    # marginal state: |Exp({i}) \ covered| and sum of J(i, chosen) per candidate
    gain = deg[cand] + 1
    jsum = np.zeros(n)
    covered = np.zeros(m, dtype=bool)
    available = np.ones(n, dtype=bool)
    acc = beta = 0.0
    n_covered = 0

    services, predicted, trace = [], [], []
    while len(services) < k:
        scores = 0.5 * ((acc + pred) + lam * ((n_covered + gain) / m)) + lam * xi * (beta + jsum)
        scores[~available] = -np.inf
        best = int(np.argmax(scores))
        c = int(cand[best])

        acc = acc + pred[best]
        beta = beta + jsum[best]
        fresh = np.zeros(m, dtype=bool)
        fresh[g.neighbors(c)] = True
        fresh[c] = True
        fresh &= ~covered
        covered |= fresh
        delta = np.flatnonzero(fresh)
        n_covered += delta.size
        if delta.size and len(services) + 1 < k:
            gain = _refresh_gain(g, pool, gain, deg, slot, covered, fresh, delta)
        jsum += _jaccard_to(support, sizes, best)
        available[best] = False

        alpha = n_covered / m
        services.append(c)
        predicted.append(float(pred[best]))
        trace.append(TraceStep(c, 0.5 * (acc + lam * alpha) + lam * xi * beta, acc, alpha, beta))

    return RecommendationList(query, services, predicted, trace, truncated=query.k > n, pool_size=n)


def topk_by_prediction(pool: CandidatePool, k: int) -> list[int]:
    """Accuracy-only baseline: the k highest predictions, lowest id first on ties."""
    order = np.lexsort((pool.candidates, -pool.predicted))
    return pool.candidates[order[:k]].tolist()


@dataclass(frozen=True)
class OracleResult:
    services: tuple[int, ...]
    value: float
    evaluated: int


def brute_force_topk(
    g: SimilarityGraph,
    platform: PlatformDataset,
    query: RecommendationQuery,
    pool: CandidatePool | None = None,
    cap: int = 10**6,
) -> OracleResult:
    """Exhaustively maximise F over all k-subsets of the pool.

    Ties resolve to the lexicographically smallest id set.

    Raises:
        SearchSpaceTooLarge: if C(pool size, k) exceeds ``cap``.
    """
    if pool is None:
        pool = build_pool(g, platform, query.user)
    n = len(pool)
    if n == 0:
        raise EmptyCandidatesError(f"user {query.user} has no unrated services on platform {query.platform_id}")
    k = min(query.k, n)
    total = math.comb(n, k)
    if total > cap:
        raise SearchSpaceTooLarge(f"C({n}, {k}) = {total} subsets exceeds the cap of {cap}")

    ids = [int(s) for s in pool.candidates]
    vectors = [pool.vector(s) for s in ids]
    dissim = np.zeros((n, n))
    for a, b in itertools.combinations(range(n), 2):
        dissim[a, b] = dissim[b, a] = jaccard_dissimilarity(vectors[a], vectors[b])

    best_value, best_subset = -math.inf, ()
    for combo in itertools.combinations(range(n), k):
        subset = [ids[c] for c in combo]
        acc = sum(float(pool.predicted[c]) for c in combo)
        alpha = expansion_ratio(g, subset)
        beta = sum(dissim[a, b] for a, b in itertools.combinations(combo, 2))
        value = acc + query.lam * (alpha + query.xi * beta)
        if value > best_value:
            best_value, best_subset = value, tuple(subset)
    return OracleResult(best_subset, best_value, total)


@dataclass
class SubmodularityReport:
    passed: bool
    checks: int
    worst_diminishing: float = math.inf
    worst_monotone: float = math.inf
    failures: list[tuple] = field(default_factory=list)


def check_submodular_phi(
    g: SimilarityGraph,
    pool: CandidatePool,
    lam: float,
    trials: int,
    seed: int,
    tol: float = 1e-9,
    alpha_only: bool = False,
) -> SubmodularityReport:
    """Sample nested sets K1 <= K2 and an outside element i; test diminishing returns and monotonicity.

    With ``alpha_only`` the check runs on the expansion ratio alone.
    """
    rng = make_rng(seed)
    ids = pool.candidates
    n = len(ids)
    if n < 1:
        raise EmptyCandidatesError("pool is empty")

    def phi(subset):
        if alpha_only:
            return expansion_ratio(g, subset)
        return phi_prime(g, pool, subset, lam)

    report = SubmodularityReport(passed=True, checks=0)
    for _ in range(trials):
        size2 = int(rng.integers(0, n))
        perm = rng.permutation(n)
        k2 = [int(ids[p]) for p in perm[:size2]]
        outside = int(ids[perm[size2]])
        size1 = int(rng.integers(0, size2 + 1))
        k1 = [k2[p] for p in rng.permutation(size2)[:size1]]

        f1, f2 = phi(k1), phi(k2)
        gain1 = phi(k1 + [outside]) - f1
        gain2 = phi(k2 + [outside]) - f2
        dim_margin = gain1 - gain2
        mono_margin = f2 - f1
        report.checks += 1
        report.worst_diminishing = min(report.worst_diminishing, dim_margin)
        report.worst_monotone = min(report.worst_monotone, mono_margin)
        if dim_margin < -tol or mono_margin < -tol:
            report.passed = False
            report.failures.append((tuple(k1), tuple(k2), outside, dim_margin, mono_margin))
    return report
