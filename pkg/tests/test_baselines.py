"""
Tests for the shifted Laplacian solver, probe estimators and dense references
"""
import itertools

import numpy as np
import pytest

from graphs.generators import gen_barabasi_albert, gen_grid3d
from graphs.graph import from_edge_list
from services.baselines import (
    dense_reference,
    estimate_probe,
    laplacian_eigenvalues,
    quadratic_form,
    smooth,
    solve_shifted,
    solve_shifted_block,
    trace_from_eigenvalues,
)
from shared.errors import GraphError, LimitError
from shared.models import ProbeConfig


@pytest.mark.unit
class TestSolveShifted:
    """Jacobi PCG on (L + qI) x = b"""

    def test_constant_rhs(self, p2):
        result = solve_shifted(p2, 1.0, np.array([1.0, 1.0]))
        np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-10)
        assert result.converged

    def test_p2_unit_vector(self, p2):
        result = solve_shifted(p2, 1.0, np.array([1.0, 0.0]))
        np.testing.assert_allclose(result.x, [2.0 / 3.0, 1.0 / 3.0], atol=1e-10)

    def test_residual_contract(self, small_graphs, grid20, rng):
        for g in small_graphs + [grid20]:
            for q in (0.01, 1.0, 50.0):
                b = rng.standard_normal(g.n)
                result = solve_shifted(g, q, b, tol=1e-10)
                residual = np.linalg.norm(g.laplacian_dense() @ result.x + q * result.x - b)
                assert residual <= 1e-10 * np.linalg.norm(b) * (1 + 1e-6)
                assert result.residual <= 1e-10
                assert result.iterations == len(result.history)

    def test_zero_rhs(self, triangle):
        result = solve_shifted(triangle, 1.0, np.zeros(3))
        np.testing.assert_array_equal(result.x, 0.0)
        assert result.converged
        assert result.iterations == 0

    def test_not_converged_flagged(self, grid20, rng):
        result = solve_shifted(grid20, 1e-3, rng.standard_normal(grid20.n), tol=1e-12, max_iter=3)
        assert not result.converged
        assert result.iterations == 3

    def test_block_matches_columns(self, grid20, rng):
        B = rng.standard_normal((grid20.n, 5))
        block = solve_shifted_block(grid20, 0.2, B, tol=1e-10)
        for j in range(5):
            single = solve_shifted(grid20, 0.2, B[:, j], tol=1e-10)
            np.testing.assert_allclose(block.x[:, j], single.x, atol=1e-8)
        assert block.converged

    def test_bad_shapes(self, triangle):
        with pytest.raises(GraphError):
            solve_shifted(triangle, 1.0, np.ones(4))
        with pytest.raises(GraphError):
            solve_shifted_block(triangle, 1.0, np.ones(3))

    def test_nonpositive_q(self, triangle):
        with pytest.raises(ValueError):
            solve_shifted(triangle, 0.0, np.ones(3))


@pytest.mark.unit
class TestSmooth:
    """x = K y"""

    def test_constant_fixed_point(self, path4_weighted):
        np.testing.assert_allclose(smooth(path4_weighted, 0.3, np.full(4, 2.5)), 2.5, atol=1e-6)

    def test_large_q_no_smoothing(self, triangle):
        y = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(smooth(triangle, 1e8, y), y, atol=1e-6)

    def test_p2(self, p2):
        np.testing.assert_allclose(smooth(p2, 1.0, np.array([1.0, 0.0])), [2.0 / 3.0, 1.0 / 3.0], atol=1e-9)

    def test_length_mismatch(self, p2):
        with pytest.raises(GraphError):
            smooth(p2, 1.0, np.ones(3))


@pytest.mark.unit
class TestDenseReference:
    """K = q (L + qI)^-1 computed densely"""

    def test_p2(self, p2):
        ref = dense_reference(p2, 1.0)
        np.testing.assert_allclose(ref.K, np.array([[2.0, 1.0], [1.0, 2.0]]) / 3.0)
        assert ref.trace == pytest.approx(4.0 / 3.0)

    def test_triangle_eigenvalues(self, triangle):
        eigenvalues = laplacian_eigenvalues(triangle)
        np.testing.assert_allclose(eigenvalues, [0.0, 3.0, 3.0], atol=1e-12)
        assert dense_reference(triangle, 1.0).trace == pytest.approx(1.5)
        assert trace_from_eigenvalues(eigenvalues, 1.0) == pytest.approx(1.5)

    def test_small_q_connected(self, grid20):
        assert dense_reference(grid20, 1e-9).trace == pytest.approx(1.0, abs=1e-4)

    def test_no_edges(self):
        g = from_edge_list([], 4)
        assert dense_reference(g, 0.3).trace == pytest.approx(4.0)

    def test_trace_increasing_in_q(self, path4_weighted, grid20):
        for g in (path4_weighted, grid20):
            traces = [dense_reference(g, q).trace for q in np.geomspace(1e-3, 1e3, 15)]
            assert all(b > a for a, b in zip(traces, traces[1:]))
            assert all(0 < t <= g.n for t in traces)

    def test_vectorized_trace(self, grid20):
        eigenvalues = laplacian_eigenvalues(grid20)
        qs = np.array([0.1, 1.0, 10.0])
        expected = [dense_reference(grid20, q).trace for q in qs]
        np.testing.assert_allclose(trace_from_eigenvalues(eigenvalues, qs), expected, rtol=1e-10)

    def test_limit(self, grid20):
        with pytest.raises(LimitError):
            dense_reference(grid20, 1.0, limit=100)
        with pytest.raises(LimitError):
            laplacian_eigenvalues(grid20, limit=100)


@pytest.mark.unit
class TestProbeEstimators:
    """Hutchinson and Girard estimators"""

    def test_p2_rademacher_enumeration(self, p2):
        """Averaging a^T K a over all four sign vectors gives tr(K) = 4/3"""
        values = [quadratic_form(p2, 1.0, np.array(a)) for a in itertools.product((-1.0, 1.0), repeat=2)]
        assert sorted(values) == pytest.approx([2.0 / 3.0, 2.0 / 3.0, 2.0, 2.0])
        assert np.mean(values) == pytest.approx(4.0 / 3.0)

    def test_rademacher_enumeration_small_graphs(self, small_graphs):
        cfg = ProbeConfig(tol=1e-12)
        for g in small_graphs:
            values = [quadratic_form(g, 0.7, np.array(a), cfg)
                      for a in itertools.product((-1.0, 1.0), repeat=g.n)]
            assert np.mean(values) == pytest.approx(dense_reference(g, 0.7).trace, rel=1e-9)

    def test_method_names(self, triangle):
        assert estimate_probe(triangle, 1.0, ProbeConfig(n_probes=4)).method == "hutchinson_cg"
        gaussian = ProbeConfig(probe_kind="gaussian", n_probes=4)
        assert estimate_probe(triangle, 1.0, gaussian).method == "girard_cg"
        direct = ProbeConfig(n_probes=4, solver="direct")
        run = estimate_probe(triangle, 1.0, direct)
        assert run.method == "hutchinson_direct"
        assert "factor_amortized" in run.flags

    def test_direct_matches_cg(self, grid20):
        cg = estimate_probe(grid20, 0.4, ProbeConfig(n_probes=20, tol=1e-12), seed=3)
        direct = estimate_probe(grid20, 0.4, ProbeConfig(n_probes=20, solver="direct"), seed=3)
        np.testing.assert_allclose(direct.samples, cg.samples, rtol=1e-8)

    def test_block_matches_single(self, grid20):
        single = estimate_probe(grid20, 0.4, ProbeConfig(n_probes=10, tol=1e-11), seed=5)
        block = estimate_probe(grid20, 0.4, ProbeConfig(n_probes=10, tol=1e-11, block_size=4), seed=5)
        np.testing.assert_allclose(block.samples, single.samples, rtol=1e-7)
        assert block.n_samples == 10

    def test_not_converged_flag(self, grid20):
        run = estimate_probe(grid20, 1e-3, ProbeConfig(n_probes=3, tol=1e-12, max_iter=2))
        assert "solver_not_converged" in run.flags

    def test_sparse_direct_path(self, monkeypatch):
        from shared.config import Config
        monkeypatch.setattr(Config, "DENSE_LIMIT", 10)
        g = gen_grid3d(3, periodic=True)
        cg = estimate_probe(g, 1.0, ProbeConfig(n_probes=5, tol=1e-12), seed=1)
        direct = estimate_probe(g, 1.0, ProbeConfig(n_probes=5, solver="direct"), seed=1)
        np.testing.assert_allclose(direct.samples, cg.samples, rtol=1e-8)

    def test_probe_config_validation(self):
        with pytest.raises(ValueError):
            ProbeConfig(tol=1.5)
        with pytest.raises(ValueError):
            ProbeConfig(n_probes=0)


@pytest.mark.statistical
class TestProbeUnbiasedness:

    def test_girard_triangle(self, triangle):
        """tr((L + I)^-1) = 1 + 1/4 + 1/4 on the triangle"""
        run = estimate_probe(triangle, 1.0, ProbeConfig(probe_kind="gaussian", n_probes=20000), seed=4)
        assert abs(run.mean - 1.5) < 4 * run.stderr

    def test_hutchinson_barabasi_albert(self):
        g = gen_barabasi_albert(300, 3, rng_seed=2)
        run = estimate_probe(g, 0.5, ProbeConfig(n_probes=4000), seed=6)
        assert abs(run.mean - dense_reference(g, 0.5).trace) < 4 * run.stderr
