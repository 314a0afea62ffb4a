import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cycle_graph, graphs, path_graph
from partfilt.errors import NumericError, ScaleError
from partfilt.filtering import PolyBasis, propagate_basis
from partfilt.graph import Laplacian, from_edges, normalized_laplacian
from partfilt.spectral import dense_eig, exact_spectral_filter, l_operator_seminorm, l_seminorm, low_eigenvectors
from partfilt.synthetic import erdos_renyi

K2 = from_edges(2, [(0, 1)])


def test_k2_eigenvalues():
    np.testing.assert_allclose(dense_eig(normalized_laplacian(K2)).lam, [0.0, 2.0], atol=1e-12)


def test_four_cycle_matches_characteristic_polynomial():
    lap = normalized_laplacian(cycle_graph(4))
    L = lap.dense()
    # det(L - tI) by LU at five points pins down the quartic t (t-1)^2 (t-2)
    for t in (-1.0, 0.5, 1.5, 3.0, 4.0):
        assert np.linalg.det(L - t * np.eye(4)) == pytest.approx(t * (t - 1) ** 2 * (t - 2), abs=1e-12)
    np.testing.assert_allclose(dense_eig(lap).lam, [0, 1, 1, 2], atol=1e-12)


def test_dense_limit():
    lap = normalized_laplacian(path_graph(50))
    with pytest.raises(ScaleError):
        dense_eig(lap, n_max=20)


def test_sign_convention():
    eig = dense_eig(normalized_laplacian(erdos_renyi(20, 0.3, 1)))
    for col in eig.U.T:
        first = col[np.abs(col) > 1e-12][0]
        assert first > 0


@given(graphs(max_n=30))
def test_eigensystem_invariants(g):
    lap = normalized_laplacian(g)
    eig = dense_eig(lap)
    np.testing.assert_allclose(eig.U.T @ eig.U, np.eye(g.n), atol=1e-8)
    np.testing.assert_allclose((eig.U * eig.lam) @ eig.U.T, lap.dense(), atol=1e-8)
    assert np.all(np.diff(eig.lam) >= -1e-12)


def test_identity_and_laplacian_filters(rng):
    lap = normalized_laplacian(erdos_renyi(15, 0.3, 2))
    eig = dense_eig(lap)
    x = rng.standard_normal(15)
    np.testing.assert_allclose(exact_spectral_filter(eig, lambda lam: np.ones_like(lam), x), x, atol=1e-10)
    np.testing.assert_allclose(exact_spectral_filter(eig, lambda lam: lam, x), lap.L @ x, atol=1e-8)


def test_chebyshev_t3_on_cycle_matches_recurrence():
    lap = normalized_laplacian(cycle_graph(4))
    e0 = np.eye(4)[:, [0]]
    exact = exact_spectral_filter(dense_eig(lap), lambda lam: 4 * (lam - 1) ** 3 - 3 * (lam - 1), e0)
    stack = propagate_basis(lap, e0, PolyBasis("chebyshev", 3))
    np.testing.assert_allclose(stack.slices[3], exact, atol=1e-12)


def test_non_finite_response():
    eig = dense_eig(normalized_laplacian(K2))
    with pytest.raises(NumericError):
        with np.errstate(divide="ignore"):
            exact_spectral_filter(eig, lambda lam: 1.0 / lam, np.ones(2))


def test_seminorm_examples():
    lap = normalized_laplacian(K2)
    assert l_seminorm(lap, np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-15)
    assert l_seminorm(lap, np.zeros(2)) == 0.0
    g = erdos_renyi(12, 0.5, 3)
    lap = normalized_laplacian(g)
    assert g.components()[0] == 1
    assert l_seminorm(lap, lap.null_vector()) == pytest.approx(0.0, abs=1e-7)


def test_seminorm_rejects_indefinite():
    bad = Laplacian(-np.eye(2), np.ones(2), np.zeros((2, 2)))
    with pytest.raises(NumericError):
        l_seminorm(bad, np.ones(2))


@given(graphs(max_n=20), st.floats(-1e3, 1e3), st.integers(0, 2**31 - 1))
def test_seminorm_homogeneity(g, alpha, seed):
    lap = normalized_laplacian(g)
    x = np.random.default_rng(seed).standard_normal(g.n)
    assert l_seminorm(lap, alpha * x) == pytest.approx(abs(alpha) * l_seminorm(lap, x), abs=1e-10, rel=1e-12)


def test_operator_seminorm_examples():
    g = erdos_renyi(10, 0.5, 4)
    lap = normalized_laplacian(g)
    assert l_operator_seminorm(lap, np.eye(10)) == pytest.approx(1.0, abs=1e-12)
    assert l_operator_seminorm(lap, np.zeros((10, 10))) == 0.0
    k2 = normalized_laplacian(K2)
    assert l_operator_seminorm(k2, k2.delta) == pytest.approx(1.0, abs=1e-12)


def test_operator_seminorm_scale_limit():
    lap = normalized_laplacian(path_graph(30))
    with pytest.raises(ScaleError):
        l_operator_seminorm(lap, np.eye(30), n_max=10)


@given(graphs(min_n=2, max_n=16), st.integers(0, 2**31 - 1))
def test_operator_seminorm_submultiplicative(g, seed):
    lap = normalized_laplacian(g)
    eig = dense_eig(lap)
    Ur = eig.U[:, eig.range_mask()]
    P = Ur @ Ur.T
    rng = np.random.default_rng(seed)
    A = P @ rng.standard_normal((g.n, g.n)) @ P
    B = P @ rng.standard_normal((g.n, g.n)) @ P
    lhs = l_operator_seminorm(lap, A @ B, eig)
    assert lhs <= l_operator_seminorm(lap, A, eig) * l_operator_seminorm(lap, B, eig) + 1e-8


def test_lanczos_path_matches_dense():
    lap = normalized_laplacian(path_graph(80))
    lam_d, U_d = low_eigenvectors(lap, 6, n_max=4096)
    lam_s, U_s = low_eigenvectors(lap, 6, n_max=10, seed=3)
    np.testing.assert_allclose(lam_s, lam_d, atol=1e-9)
    # path spectrum is simple, so the sign-fixed vectors agree
    np.testing.assert_allclose(U_s, U_d, atol=1e-6)
