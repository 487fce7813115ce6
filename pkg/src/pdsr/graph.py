"""
Service-similarity graph built from repeated LSH indexing rounds.

Round t re-samples every platform's hash family, rebuilds all service indices
and links every pair of services whose indices coincide. Candidate pairs are
found by bucketing services on their index value, which yields exactly the
pairs an all-pairs equality scan would.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .federation import PlatformDataset, check_platforms, index_matrix


@dataclass(eq=False)
class SimilarityGraph:
    """Undirected, loop-free graph over services 0..M-1.

    ``witness[i, j]`` holds the first round (1-based) in which services i and
    j received identical indices, or 0 when they are not adjacent. The matrix
    is symmetric with a zero diagonal. Neighbour lists are kept in CSR form
    (``indptr``, ``indices``) for O(deg) iteration.
    """

    witness: np.ndarray
    t_rounds: int = 0
    seed: int | None = None

    def __post_init__(self):
        w = np.asarray(self.witness)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"witness must be square, got {w.shape}")
        if np.any(np.diag(w)) or not np.array_equal(w, w.T):
            raise ValueError("witness matrix must be symmetric with an empty diagonal")
        if w.flags.writeable:
            w = w.copy()
            w.setflags(write=False)
        self.witness = w
        self.adjacency = w > 0
        self.adjacency.setflags(write=False)

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[tuple[int, int]]) -> "SimilarityGraph":
        w = np.zeros((n_vertices, n_vertices), dtype=np.uint16)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            w[i, j] = w[j, i] = 1
        return cls(w, t_rounds=1 if w.any() else 0)

    @property
    def n_vertices(self) -> int:
        return self.witness.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(self.adjacency)) // 2

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.n_vertices
        flat = np.flatnonzero(self.adjacency)
        counts = np.count_nonzero(self.adjacency, axis=1)
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        flat -= np.repeat(np.arange(m, dtype=np.int64) * m, counts)
        return indptr, flat

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_lists(self, vertices) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated neighbour lists of ``vertices`` and the position each entry came from.

        Returns:
            (flat, owner): ``flat[k]`` is a neighbour of ``vertices[owner[k]]``.
        """
        vertices = np.asarray(vertices, dtype=np.int64)
        starts = self.indptr[vertices]
        lens = self.indptr[vertices + 1] - starts
        owner = np.repeat(np.arange(vertices.size), lens)
        ends = np.cumsum(lens)
        offsets = np.arange(ends[-1] if ends.size else 0) + np.repeat(starts - (ends - lens), lens)
        return self.indices[offsets], owner

    def edges(self) -> Iterator[tuple[int, int, int]]:
        """Yield (i, j, witness_round) with i < j in lexicographic order."""
        ii, jj = np.nonzero(np.triu(self.witness, 1))
        for i, j in zip(ii.tolist(), jj.tolist()):
            yield i, j, int(self.witness[i, j])

    def to_tsv(self) -> str:
        lines = [f"# PDSR-graph v1 M={self.n_vertices} T={self.t_rounds} seed={self.seed}"]
        lines.extend(f"{i}\t{j}\t{t}" for i, j, t in self.edges())
        return "\n".join(lines) + "\n"

    def stats(self) -> dict:
        m = self.n_vertices
        return {
            "vertices": m,
            "edges": self.n_edges,
            "mean_degree": 2.0 * self.n_edges / m if m else 0.0,
        }


def _link_equal_rows(witness: np.ndarray, bits: np.ndarray, round_: int, chunk: int = 128) -> None:
    """Mark every not-yet-linked pair with identical index rows as linked in ``round_``.

    Services are bucketed on their index value. Small buckets are linked block
    by block; when the buckets jointly cover most pairs, a row-chunked label
    comparison is cheaper and gives the same result.
    """
    _, bucket = np.unique(bits, axis=0, return_inverse=True)
    bucket = bucket.reshape(-1)
    m = bucket.size
    sizes = np.bincount(bucket)
    if int((sizes.astype(np.int64) ** 2).sum()) > m * m // 4:
        same = np.empty((chunk, m), dtype=bool)
        for lo in range(0, m, chunk):
            hi = min(lo + chunk, m)
            rows, eq = witness[lo:hi], same[: hi - lo]
            np.equal(bucket[lo:hi, None], bucket[None, :], out=eq)
            eq &= rows == 0
            rows[eq] = round_
        return
    order = np.argsort(bucket, kind="stable")
    cuts = np.flatnonzero(np.diff(bucket[order])) + 1
    for members in np.split(order, cuts):
        if members.size < 2:
            continue
        block = witness[np.ix_(members, members)]
        block[block == 0] = round_
        witness[np.ix_(members, members)] = block


def build_graph(
    platforms: Sequence[PlatformDataset],
    h_counts: Sequence[int],
    t_rounds: int,
    seed: int,
    transcript: list | None = None,
) -> SimilarityGraph:
    """Link services whose concatenated LSH indices agree in at least one of ``t_rounds`` rounds."""
    if t_rounds < 0:
        raise ValueError(f"t_rounds must be non-negative, got {t_rounds}")
    if t_rounds > np.iinfo(np.uint16).max:
        raise ValueError(f"t_rounds above {np.iinfo(np.uint16).max} is not supported")
    m = check_platforms(platforms)
    witness = np.zeros((m, m), dtype=np.uint16)
    for t in range(1, t_rounds + 1):
        bits = index_matrix(platforms, h_counts, seed, round_=t, transcript=transcript)
        _link_equal_rows(witness, bits, t)
    np.fill_diagonal(witness, 0)
    return SimilarityGraph(witness, t_rounds=t_rounds, seed=seed)


def _as_members(g: SimilarityGraph, subset) -> np.ndarray:
    ids = np.asarray(sorted(set(int(i) for i in subset)), dtype=np.int64)
    if ids.size and (ids[0] < 0 or ids[-1] >= g.n_vertices):
        bad = ids[(ids < 0) | (ids >= g.n_vertices)]
        raise ValueError(f"unknown vertex ids {bad.tolist()} (graph has {g.n_vertices} vertices)")
    return ids


def expanded_mask(g: SimilarityGraph, subset) -> np.ndarray:
    ids = _as_members(g, subset)
    mask = np.zeros(g.n_vertices, dtype=bool)
    if ids.size:
        mask[ids] = True
        mask |= g.adjacency[ids].any(axis=0)
    return mask


def expanded_set(g: SimilarityGraph, subset) -> frozenset[int]:
    """The subset together with every vertex adjacent to one of its members."""
    return frozenset(np.flatnonzero(expanded_mask(g, subset)).tolist())


def expansion_ratio(g: SimilarityGraph, subset) -> float:
    if g.n_vertices < 1:
        raise ValueError("graph has no vertices")
    return int(expanded_mask(g, subset).sum()) / g.n_vertices
