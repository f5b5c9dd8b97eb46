import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from structnet.errors import NumericError, ShapeError, ValidationError
from structnet.linalg import (
    dct_basis,
    graph_laplacian,
    matmul,
    path_edges,
    solve_linear,
    spectral_norm_estimate,
    svd_values,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def triple_loop(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for k in range(a.shape[1]):
                s += a[i, k] * b[k, j]
            out[i, j] = s
    return out


def charpoly_singular_values(a):
    # independent oracle: roots of det(t I - A^T A)
    g = a.T @ a
    roots = np.roots(np.poly(g)).real
    return np.sort(np.sqrt(np.clip(roots, 0, None)))[::-1]


class TestMatmul:
    def test_identity(self, rng):
        a = rng.standard_normal((3, 4))
        assert np.array_equal(matmul(np.eye(3), a), a)

    def test_small(self):
        assert np.array_equal(matmul([[1, 2], [3, 4]], [[1], [1]]), [[3], [7]])

    def test_triple_loop(self, rng):
        a, b = rng.standard_normal((4, 5)), rng.standard_normal((5, 3))
        assert np.max(np.abs(matmul(a, b) - triple_loop(a, b))) < 1e-12

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_rejects_non_matrix(self):
        with pytest.raises(ShapeError):
            matmul(np.ones(3), np.ones((3, 1)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
    def test_associative(self, m, n, p, q, seed):
        r = np.random.default_rng(seed)
        a, b, c = r.standard_normal((m, n)), r.standard_normal((n, p)), r.standard_normal((p, q))
        assert np.max(np.abs(matmul(matmul(a, b), c) - matmul(a, matmul(b, c)))) < 1e-9


class TestSvdValues:
    def test_diag(self):
        np.testing.assert_allclose(svd_values(np.diag([3.0, -2.0, 0.5])), [3, 2, 0.5], atol=1e-14)

    def test_identity(self):
        np.testing.assert_allclose(svd_values(np.eye(4)), np.ones(4), atol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_charpoly_oracle(self, seed):
        a = np.random.default_rng(seed).standard_normal((3, 3))
        assert np.max(np.abs(svd_values(a) - charpoly_singular_values(a))) < 1e-8

    @pytest.mark.parametrize("shape", [(1, 1), (1, 5), (5, 1), (3, 7), (7, 3), (6, 6), (9, 4), (33, 33)])
    def test_rectangular_matches_lapack(self, shape, rng):
        a = rng.standard_normal(shape)
        s = svd_values(a)
        assert s.shape == (min(shape),)
        np.testing.assert_allclose(s, np.linalg.svd(a, compute_uv=False), atol=1e-11)

    def test_rank_deficient(self, rng):
        u = rng.standard_normal((6, 2))
        s = svd_values(u @ u.T)
        assert np.all(s[2:] < 1e-10)

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ShapeError):
            svd_values(np.zeros((0, 3)))
        with pytest.raises(ValidationError):
            svd_values(np.array([[np.nan]]))

    def test_sweep_cap_raises(self, rng):
        with pytest.raises(NumericError):
            svd_values(rng.standard_normal((8, 8)), max_sweeps=1)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
    def test_properties(self, a):
        s = svd_values(a)
        assert np.all(s >= 0)
        assert np.all(np.diff(s) <= 1e-12 * max(1.0, s[0]))
        # Frobenius norm is the root sum of squared singular values
        assert abs(np.sum(s ** 2) - np.sum(a ** 2)) <= 1e-9 * max(1.0, np.sum(a ** 2))
        np.testing.assert_allclose(s, svd_values(a.T), atol=1e-9 * max(1.0, s[0]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**31))
    def test_orthogonal_invariance(self, n, seed):
        r = np.random.default_rng(seed)
        a = r.standard_normal((n, n))
        q, _ = np.linalg.qr(r.standard_normal((n, n)))
        np.testing.assert_allclose(svd_values(q @ a), svd_values(a), atol=1e-10)


class TestDct:
    def test_n1(self):
        assert np.array_equal(dct_basis(1), [[1.0]])

    @pytest.mark.parametrize("n", [2, 4, 8, 16])
    def test_orthonormal(self, n):
        d = dct_basis(n)
        assert np.max(np.abs(d @ d.T - np.eye(n))) < 1e-10

    def test_constant_vector(self):
        np.testing.assert_allclose(dct_basis(4) @ np.ones(4), [2, 0, 0, 0], atol=1e-14)

    def test_explicit_formula(self):
        n = 5
        k, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        ref = np.cos(np.pi * (2 * j + 1) * k / (2 * n)) * np.sqrt(2 / n)
        ref[0] /= np.sqrt(2)
        np.testing.assert_allclose(dct_basis(n), ref, atol=1e-14)

    def test_rejects_zero(self):
        with pytest.raises(ValidationError):
            dct_basis(0)


class TestLaplacian:
    def test_path(self):
        assert np.array_equal(graph_laplacian(3, [(0, 1), (1, 2)]),
                              [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_no_edges(self):
        assert np.array_equal(graph_laplacian(3, []), np.zeros((3, 3)))

    def test_random_graph(self, rng):
        edges = [(i, j) for i in range(6) for j in range(i + 1, 6) if rng.random() < 0.5]
        lap = graph_laplacian(6, edges)
        assert np.max(np.abs(lap @ np.ones(6))) < 1e-14
        assert np.array_equal(lap, lap.T)
        assert np.min(np.linalg.eigvalsh(lap)) > -1e-12

    @pytest.mark.parametrize("edges", [[(0, 3)], [(1, 1)], [(0, 1), (1, 0)], [(-1, 0)]])
    def test_rejects_bad_edges(self, edges):
        with pytest.raises(ValidationError):
            graph_laplacian(3, edges)

    def test_path_edges(self):
        assert path_edges(4) == [(0, 1), (1, 2), (2, 3)]


class TestSpectralNorm:
    def test_diag(self):
        assert abs(spectral_norm_estimate(np.diag([5.0, 1.0])) - 5) < 5e-6

    def test_zero(self):
        assert spectral_norm_estimate(np.zeros((3, 4))) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_svd(self, seed):
        a = np.random.default_rng(seed).standard_normal((8, 8))
        top = svd_values(a)[0]
        assert abs(spectral_norm_estimate(a) - top) / top < 1e-6

    def test_iteration_cap(self, rng):
        # two nearly tied top singular values converge slowly
        a = np.diag([1.0, 1.0 - 1e-9, 0.5])
        with pytest.raises(NumericError):
            spectral_norm_estimate(a + 1e-3 * rng.standard_normal((3, 3)), max_iters=2, tol=1e-15)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValidationError):
            spectral_norm_estimate(np.eye(2), tol=0)


class TestSolve:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(solve_linear(np.eye(3), b), b)

    def test_diag(self):
        np.testing.assert_allclose(solve_linear([[2, 0], [0, 4]], [2, 8]), [1, 2], atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_residual(self, seed):
        r = np.random.default_rng(seed)
        a = r.standard_normal((5, 5)) + 5 * np.eye(5)
        b = r.standard_normal(5)
        x = solve_linear(a, b)
        assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)

    def test_matrix_rhs(self, rng):
        a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        x = solve_linear(a, np.eye(4))
        assert np.max(np.abs(a @ x - np.eye(4))) < 1e-12

    def test_needs_pivoting(self):
        np.testing.assert_allclose(solve_linear([[0, 1], [1, 0]], [2, 3]), [3, 2])

    def test_singular(self):
        with pytest.raises(NumericError):
            solve_linear([[1, 2], [2, 4]], [1, 1])

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            solve_linear(np.ones((2, 3)), np.ones(2))
        with pytest.raises(ShapeError):
            solve_linear(np.eye(2), np.ones(3))
