import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import THIRTEEN_EDGES, random_graph, random_platforms
from pdsr.data import normalize
from pdsr.federation import PlatformDataset, index_matrix
from pdsr.graph import SimilarityGraph, _link_equal_rows, build_graph, expanded_set, expansion_ratio
from pdsr.lsh import angle_between, edge_probability
from pdsr.synthetic import make_response_times


def literal_graph(platforms, h_counts, t_rounds, seed):
    """All-pairs index comparison per round, as a reference for the bucketed build."""
    m = platforms[0].n_services
    edges = set()
    for t in range(1, t_rounds + 1):
        bits = index_matrix(platforms, h_counts, seed, round_=t)
        rows = [tuple(r) for r in bits.tolist()]
        for i in range(m):
            for j in range(i + 1, m):
                if rows[i] == rows[j]:
                    edges.add((i, j))
    return edges


def neighbourhood_closure(edges, subset):
    out = set(subset)
    for i, j in edges:
        if i in subset:
            out.add(j)
        if j in subset:
            out.add(i)
    return out


class TestBuild:
    def test_zero_rounds_empty(self, platforms):
        g = build_graph(platforms, [3, 3], 0, seed=1)
        assert g.n_edges == 0
        assert g.to_tsv() == "# PDSR-graph v1 M=40 T=0 seed=1\n"

    def test_identical_services_linked(self, rng):
        ps = random_platforms(rng, m=12)
        for p in ps:
            p.qos[2] = p.qos[9]
        for seed in range(5):
            assert build_graph(ps, [6, 6], 1, seed).has_edge(2, 9)

    @pytest.mark.parametrize("t", [1, 3, 6])
    def test_matches_all_pairs_scan(self, rng, t):
        ps = random_platforms(rng, m=35, density=0.4)
        g = build_graph(ps, [2, 1], t, seed=17)
        assert set((i, j) for i, j, _ in g.edges()) == literal_graph(ps, [2, 1], t, 17)

    def test_witness_is_first_linking_round(self, rng):
        ps = random_platforms(rng, m=25)
        g = build_graph(ps, [1, 1], 5, seed=3)
        for i, j, w in g.edges():
            assert 1 <= w <= 5
            bits = index_matrix(ps, [1, 1], 3, round_=w)
            assert np.array_equal(bits[i], bits[j])
            for earlier in range(1, w):
                b = index_matrix(ps, [1, 1], 3, round_=earlier)
                assert not np.array_equal(b[i], b[j])

    def test_symmetric_loop_free(self, platforms):
        g = build_graph(platforms, [1, 1], 4, seed=0)
        assert np.array_equal(g.adjacency, g.adjacency.T)
        assert not np.diag(g.adjacency).any()

    def test_deterministic(self, platforms):
        a = build_graph(platforms, [2, 2], 5, seed=11).to_tsv()
        b = build_graph(platforms, [2, 2], 5, seed=11).to_tsv()
        assert a == b

    def test_more_rounds_only_add_edges(self, platforms):
        small = build_graph(platforms, [2, 2], 3, seed=6).adjacency
        big = build_graph(platforms, [2, 2], 6, seed=6).adjacency
        assert not (small & ~big).any()

    def test_edge_frequency_single_bit(self):
        # one platform, two orthogonal services, H=1, T=1 -> P(edge) = 1/2
        qos = np.array([[1.0, 0.0], [0.0, 1.0]])
        p = PlatformDataset(1, [0, 1], qos)
        hits = sum(build_graph([p], [1], 1, seed=s).has_edge(0, 1) for s in range(10**4))
        assert abs(hits / 10**4 - edge_probability([math.pi / 2], [1], 1)) < 0.02

    def test_rejects_bad_rounds(self, platforms):
        with pytest.raises(ValueError):
            build_graph(platforms, [1, 1], -1, seed=0)

    def test_rejects_asymmetric_witness(self):
        w = np.zeros((3, 3), dtype=np.uint16)
        w[0, 1] = 1
        with pytest.raises(ValueError):
            SimilarityGraph(w)

    def test_stats(self, thirteen):
        assert thirteen.stats() == {"vertices": 13, "edges": 11, "mean_degree": pytest.approx(22 / 13)}

    def test_tsv_lines(self):
        g = SimilarityGraph.from_edges(4, [(2, 1), (0, 3)])
        assert g.to_tsv().splitlines()[1:] == ["0\t3\t1", "1\t2\t1"]


class TestExpansion:
    def test_thirteen_vertex_subsets(self, thirteen):
        assert len(expanded_set(thirteen, {0, 1, 2})) == 8
        assert len(expanded_set(thirteen, {3, 8, 12})) == 10
        assert Fraction(expansion_ratio(thirteen, {0, 1, 2})).limit_denominator(100) == Fraction(8, 13)
        assert Fraction(expansion_ratio(thirteen, {3, 8, 12})).limit_denominator(100) == Fraction(10, 13)

    def test_empty_subset(self, thirteen):
        assert expanded_set(thirteen, set()) == frozenset()
        assert expansion_ratio(thirteen, []) == 0.0

    def test_all_vertices(self, thirteen):
        assert expanded_set(thirteen, range(13)) == frozenset(range(13))

    def test_complete_graph_singleton(self):
        k4 = SimilarityGraph.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        for v in range(4):
            assert expansion_ratio(k4, {v}) == 1.0

    def test_unknown_vertex(self, thirteen):
        with pytest.raises(ValueError):
            expanded_set(thirteen, {13})
        with pytest.raises(ValueError):
            expansion_ratio(thirteen, {-1})

    @settings(max_examples=60)
    @given(st.integers(0, 2**32 - 1), st.sets(st.integers(0, 29)), st.sets(st.integers(0, 29)))
    def test_matches_edge_list_closure(self, seed, a, b):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 30)
        edges = [(i, j) for i, j, _ in g.edges()]
        assert expanded_set(g, a) == neighbourhood_closure(edges, a)
        # monotone and extensive
        assert expanded_set(g, a) <= expanded_set(g, a | b)
        assert a <= expanded_set(g, a)


def test_thirteen_vertex_edges_have_seven_outgoing_per_subset():
    # the two highlighted triples touch the same number of edges
    for subset in ({0, 1, 2}, {3, 8, 12}):
        touching = [e for e in THIRTEEN_EDGES if e[0] in subset or e[1] in subset]
        assert len(touching) == 7


def test_mean_edge_count_matches_theory():
    # expected edges = sum of per-pair edge probabilities; edges within one graph are
    # correlated, so the bound uses the empirical standard error over rebuilds
    raw = normalize(make_response_times(n_users=40, n_services=100, seed=7), "inverted-minmax")
    ps = [
        PlatformDataset(1, np.arange(15), raw[:15].T.copy()),
        PlatformDataset(2, np.arange(15, 40), raw[15:].T.copy()),
    ]
    expected = sum(
        edge_probability([angle_between(p.qos[i], p.qos[j]) for p in ps], [3, 3], 4)
        for i in range(100)
        for j in range(i + 1, 100)
    )
    counts = np.array([build_graph(ps, [3, 3], 4, seed=s).n_edges for s in range(120)])
    stderr = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - expected) <= 3 * stderr


@pytest.mark.parametrize("width", [1, 2, 12])
def test_link_paths_agree_with_pairwise_equality(width):
    # width 1 takes the chunked scan, width 12 the bucket join
    rng = np.random.default_rng(width)
    m = 300
    witness = np.zeros((m, m), dtype=np.uint16)
    rounds = [rng.integers(0, 2, (m, width), dtype=np.uint8) for _ in range(3)]
    for t, bits in enumerate(rounds, start=1):
        _link_equal_rows(witness, bits, t, chunk=64)
    np.fill_diagonal(witness, 0)
    expected = np.zeros_like(witness)
    for t, bits in reversed(list(enumerate(rounds, start=1))):
        same = (bits[:, None, :] == bits[None, :, :]).all(axis=2)
        expected[same] = t
    np.fill_diagonal(expected, 0)
    np.testing.assert_array_equal(witness, expected)
