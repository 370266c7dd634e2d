"""
Tests for the random spanning forest sampler
"""
from collections import Counter

import numpy as np
import pytest

from graphs.graph import from_edge_list
from services.baselines import dense_reference
from services.forest_sampler import forest_from_parents, sample_forest, sample_forest_conditional
from services.oracle import enumerate_forests
from services.streams import sample_rng
from shared.errors import GraphError


def draw_many(g, q, n, seed=0):
    return [sample_forest(g, q, sample_rng(seed, i)) for i in range(n)]


def assert_valid_forest(g, f):
    """Structural invariants of one sample"""
    assert np.all(f.root_of[f.roots] == f.roots)
    assert np.all(np.isin(f.root_of, f.roots))
    assert set(f.first_visit_roots.tolist()) <= set(f.roots.tolist())
    assert np.all(f.tree_id == f.tree_id[f.root_of])
    assert f.tree_sizes.sum() == g.n
    assert len(f.tree_sizes) == f.root_count >= 1
    for i in range(g.n):
        # parents walk to the root without repeating, along graph edges
        v, hops = i, 0
        while f.parent[v] >= 0:
            assert f.parent[v] in g.neighbors(v)[0]
            v = f.parent[v]
            hops += 1
            assert hops <= g.n
        assert v == f.root_of[i]


@pytest.mark.unit
class TestSampleForest:
    """Structure and determinism of single draws"""

    def test_single_node(self):
        """An isolated node roots at its only occupancy"""
        g = from_edge_list([], 1)
        f = sample_forest(g, 0.7, sample_rng(0, 0))
        assert f.roots.tolist() == [0]
        assert f.first_visit_roots.tolist() == [0]
        assert f.steps == 1

    def test_invariants(self, small_graphs):
        for g in small_graphs:
            for q in (0.1, 1.0, 10.0):
                for f in draw_many(g, q, 50):
                    assert_valid_forest(g, f)

    def test_invariants_grid(self, grid20):
        for f in draw_many(grid20, 0.5, 5):
            assert_valid_forest(grid20, f)

    def test_same_stream_same_forest(self, triangle):
        a = sample_forest(triangle, 1.0, sample_rng(42, 3))
        b = sample_forest(triangle, 1.0, sample_rng(42, 3))
        assert a.key() == b.key()
        assert a.steps == b.steps

    def test_large_q_roots_everything(self, grid20):
        f = sample_forest(grid20, 1e9, sample_rng(1, 0))
        assert f.root_count == grid20.n

    def test_tiny_q_single_tree(self, grid20):
        f = sample_forest(grid20, 1e-5, sample_rng(1, 0))
        assert f.root_count == 1

    def test_nonpositive_q(self, p2):
        with pytest.raises(ValueError):
            sample_forest(p2, 0.0)

    def test_integer_seed_accepted(self, p2):
        assert sample_forest(p2, 1.0, 5).key() == sample_forest(p2, 1.0, 5).key()


@pytest.mark.unit
class TestConditional:
    """Sampling given the first-visit root set"""

    def test_all_preset(self, p2):
        """X = {0, 1}: both roots, no walk at all"""
        f = sample_forest_conditional(p2, 1.0, [0, 1], sample_rng(0, 0))
        assert f.roots.tolist() == [0, 1]
        assert f.steps == 0

    def test_single_preset_root_on_p2(self, p2):
        """X = {0}: node 1 cannot root on its first visit and then hits 0"""
        for i in range(200):
            f = sample_forest_conditional(p2, 1.0, [0], sample_rng(3, i))
            assert f.root_count == 1
            assert f.root_of.tolist() == [0, 0]

    def test_first_visit_roots_equal_x(self, small_graphs):
        rng = np.random.default_rng(8)
        for g in small_graphs:
            for i in range(30):
                X = np.flatnonzero(rng.random(g.n) < 0.4)
                f = sample_forest_conditional(g, 1.0, X, sample_rng(9, i))
                assert f.first_visit_roots.tolist() == sorted(X.tolist())
                assert_valid_forest(g, f)

    def test_boolean_mask(self, triangle):
        f = sample_forest_conditional(triangle, 1.0, np.array([True, False, False]), sample_rng(0, 1))
        assert f.first_visit_roots.tolist() == [0]

    @pytest.mark.parametrize("roots", [{0}, frozenset([0]), (i for i in [0]), range(1)])
    def test_python_collections(self, p2, roots):
        f = sample_forest_conditional(p2, 1.0, roots, sample_rng(0, 0))
        assert f.root_of.tolist() == [0, 0]
        assert f.first_visit_roots.tolist() == [0]

    def test_set_out_of_range(self, p2):
        with pytest.raises(GraphError):
            sample_forest_conditional(p2, 1.0, {0, 5})

    def test_id_out_of_range(self, p2):
        with pytest.raises(GraphError):
            sample_forest_conditional(p2, 1.0, [2])

    def test_isolated_node_must_be_in_x(self):
        g = from_edge_list([(0, 1)], 3)
        with pytest.raises(GraphError):
            sample_forest_conditional(g, 1.0, [0])


@pytest.mark.unit
class TestForestFromParents:

    def test_p2_attached(self):
        f = forest_from_parents(np.array([1, -1]))
        assert f.roots.tolist() == [1]
        assert f.root_of.tolist() == [1, 1]
        assert f.tree_sizes.tolist() == [2]

    def test_tree_ids_ordered_by_root(self):
        f = forest_from_parents(np.array([-1, 2, -1, 2]))
        assert f.roots.tolist() == [0, 2]
        assert f.tree_id.tolist() == [0, 1, 1, 1]

    def test_cycle_rejected(self):
        with pytest.raises(GraphError):
            forest_from_parents(np.array([1, 0]))


@pytest.mark.statistical
class TestDistribution:
    """Sampled forests follow P(phi) proportional to q^|roots| * prod w"""

    @pytest.mark.parametrize("q", [0.1, 1.0, 10.0])
    def test_total_variation_against_enumeration(self, p2, triangle, path4_weighted, q):
        for g in (p2, triangle, path4_weighted):
            enum = enumerate_forests(g, q)
            exact = {f.parent: p for f, p in zip(enum.forests, enum.probabilities)}
            counts = Counter(f.key() for f in draw_many(g, q, 30000, seed=11))
            tv = 0.5 * sum(abs(counts.get(key, 0) / 30000 - p) for key, p in exact.items())
            assert set(counts) <= set(exact)
            assert tv < 0.02, f"{g.name} q={q}: total variation {tv:.4f}"

    def test_p2_three_forests_equally_likely(self, p2):
        counts = Counter(f.key() for f in draw_many(p2, 1.0, 30000, seed=2))
        assert set(counts) == {(-1, -1), (1, -1), (-1, 0)}
        for c in counts.values():
            assert abs(c / 30000 - 1 / 3) < 4 * np.sqrt(2 / 9 / 30000)

    def test_root_count_mean_is_trace(self, small_graphs):
        for g in small_graphs:
            roots = np.array([f.root_count for f in draw_many(g, 1.0, 20000, seed=5)])
            stderr = roots.std(ddof=1) / np.sqrt(roots.size)
            assert abs(roots.mean() - dense_reference(g, 1.0).trace) < 4 * stderr

    @pytest.mark.parametrize("name", ["p2", "triangle"])
    def test_root_matrix_matches_k(self, name, request):
        """Frequency of r(i) = j estimates K[i, j]"""
        g = request.getfixturevalue(name)
        K = dense_reference(g, 1.0).K
        S = np.zeros((g.n, g.n))
        forests = draw_many(g, 1.0, 20000, seed=6)
        for f in forests:
            S[np.arange(g.n), f.root_of] += 1
        np.testing.assert_allclose(S / len(forests), K, atol=0.015)

    @pytest.mark.parametrize("name", ["triangle", "star9", "path4_weighted"])
    def test_first_visit_roots_are_independent_bernoulli(self, name, request):
        g, q, n = request.getfixturevalue(name), 1.0, 20000
        indicators = np.zeros((n, g.n))
        for i, f in enumerate(draw_many(g, q, n, seed=7)):
            indicators[i, f.first_visit_roots] = 1.0
        p = q / (q + g.degrees)
        freq = indicators.mean(axis=0)
        assert np.all(np.abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n))
        corr = np.corrcoef(indicators, rowvar=False)
        off_diagonal = corr[~np.eye(g.n, dtype=bool)]
        assert np.all(np.abs(off_diagonal) < 0.03)

    def test_mean_steps(self, p2, triangle, small_graphs, path4_weighted):
        """E[steps] = tr(K (I + D/q)); 8/3 on P2 at q = 1"""
        cases = [(p2, 1.0), (triangle, 0.5), (path4_weighted, 2.0)] + [(g, 1.0) for g in small_graphs]
        for g, q in cases:
            K = dense_reference(g, q).K
            expected = np.trace(K) + np.sum(np.diag(K) * g.degrees) / q
            steps = np.array([f.steps for f in draw_many(g, q, 20000, seed=8)])
            assert abs(steps.mean() - expected) < 0.05 * expected, g.name
            # n + 2m/q for unit weights
            assert steps.mean() < g.n + g.degrees.sum() / q, g.name
        assert np.isclose(np.trace(dense_reference(p2, 1.0).K) * 2, 8 / 3)

    def test_conditional_empty_set_on_p2(self, p2):
        """Given no first-visit roots, E|rho| = 4/3 on P2 at q = 1"""
        roots = np.array([sample_forest_conditional(p2, 1.0, [], sample_rng(4, i)).root_count
                          for i in range(20000)])
        stderr = roots.std(ddof=1) / np.sqrt(roots.size)
        assert abs(roots.mean() - 4 / 3) < 4 * stderr
