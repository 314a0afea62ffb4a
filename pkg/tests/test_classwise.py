import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from partfilt.classwise import classwise_filter, construct_separating_W, kmeans, kmeans_objective
from partfilt.errors import ArgumentError, GraphIndexError, PreconditionError, ShapeError
from partfilt.verification import check_separating, random_valid_triple, separating_margin


def brute_force_kmeans(Z, c):
    """Minimum objective over every assignment with ``c`` non-empty clusters."""
    best = np.inf
    for assign in itertools.product(range(c), repeat=Z.shape[0]):
        assign = np.array(assign)
        if len(set(assign)) < c:
            continue
        cent = np.stack([Z[assign == j].mean(axis=0) for j in range(c)])
        best = min(best, kmeans_objective(Z, assign, cent))
    return best


def test_single_cluster_is_mean(rng):
    Z = rng.standard_normal((7, 3))
    assign, cent = kmeans(Z, 1)
    assert np.all(assign == 0)
    np.testing.assert_allclose(cent[0], Z.mean(axis=0), atol=1e-15)


def test_two_blobs_reach_global_optimum(rng):
    Z = np.vstack([rng.normal(0, 0.1, (4, 2)), rng.normal(5, 0.1, (4, 2))])
    assign, cent = kmeans(Z, 2, seed=3)
    assert len(set(assign[:4])) == 1 and len(set(assign[4:])) == 1
    assert kmeans_objective(Z, assign, cent) == pytest.approx(brute_force_kmeans(Z, 2), rel=1e-12)


def test_duplicate_points_give_zero_objective():
    Z = np.array([[1.0, 2.0]] * 3 + [[0.0, -1.0]] * 2)
    assign, cent = kmeans(Z, 2, seed=0)
    assert kmeans_objective(Z, assign, cent) == 0.0
    # more clusters than distinct points: still no empty cluster
    assign, _ = kmeans(Z, 3, seed=0)
    assert set(assign) == {0, 1, 2}


def test_kmeans_rejects_bad_c():
    with pytest.raises(ArgumentError):
        kmeans(np.zeros((2, 2)), 3)
    with pytest.raises(ArgumentError):
        kmeans(np.zeros((2, 2)), 0)


@given(st.integers(0, 2**31 - 1), st.integers(2, 40), st.integers(1, 5))
def test_kmeans_trace_monotone(seed, n, c):
    c = min(c, n)
    Z = np.random.default_rng(seed).standard_normal((n, 3))
    assign, cent, trace = kmeans(Z, c, seed=seed, return_trace=True)
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(trace, trace[1:]))
    assert set(assign) == set(range(c))
    assert kmeans_objective(Z, assign, cent) == pytest.approx(trace[-1], rel=1e-12, abs=1e-12)


def test_kmeans_deterministic(rng):
    Z = rng.standard_normal((30, 2))
    a1, c1 = kmeans(Z, 4, seed=11)
    a2, c2 = kmeans(Z, 4, seed=11)
    assert np.array_equal(a1, a2) and np.array_equal(c1, c2)


def test_classwise_examples():
    Z = np.array([[1.0, 2.0], [3.0, 4.0]])
    W = np.stack([np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])])
    np.testing.assert_array_equal(classwise_filter(Z, [0, 0], W), Z)
    np.testing.assert_array_equal(classwise_filter(Z, [0, 1], W), [[1.0, 2.0], [4.0, 3.0]])
    with pytest.raises(GraphIndexError):
        classwise_filter(Z, [0, 2], W)
    with pytest.raises(ShapeError):
        classwise_filter(Z, [0], W)
    with pytest.raises(ShapeError):
        classwise_filter(Z, [0, 0], np.ones((2, 3, 3)))


@given(st.integers(0, 2**31 - 1))
def test_classwise_equivariant_under_cluster_relabeling(seed):
    rng = np.random.default_rng(seed)
    n, c = 9, 3
    Z = rng.standard_normal((n, c))
    W = rng.standard_normal((c, c, c))
    assign = rng.integers(0, c, n)
    perm = rng.permutation(c)
    # relabel cluster j as perm[j] and move its transform along with it
    W_perm = np.empty_like(W)
    W_perm[perm] = W
    assert np.array_equal(classwise_filter(Z, perm[assign], W_perm), classwise_filter(Z, assign, W))
    # permuting rows permutes the output rows
    order = rng.permutation(n)
    assert np.array_equal(classwise_filter(Z[order], assign[order], W), classwise_filter(Z, assign, W)[order])


def test_single_map_example():
    z1, z2, z3 = np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 2.0])
    W = construct_separating_W(z1, z2, z3)
    d12 = np.linalg.norm(W @ (z1 - z2))
    d13 = np.linalg.norm(W @ (z1 - z3))
    assert d12 == pytest.approx(1.0, abs=1e-12)
    assert d13 == pytest.approx(0.5, abs=1e-12)


def test_pair_maps_send_z3_onto_z1():
    z1, z2, z3 = np.array([1.0, 1.0]), np.array([1.5, 1.0]), np.array([-2.0, 3.0])
    W1, W2 = construct_separating_W(z1, z2, z3, "pair")
    assert np.array_equal(W1, np.eye(2))
    assert np.linalg.norm(W1 @ z1 - W2 @ z3) == pytest.approx(0.0, abs=1e-12)
    assert separating_margin(z1, z2, z3, "pair") == pytest.approx(0.5, abs=1e-12)


def test_separating_preconditions():
    z = np.array([1.0, 0.0])
    with pytest.raises(PreconditionError):
        construct_separating_W(z, z, np.array([0.0, 3.0]))
    with pytest.raises(PreconditionError):
        construct_separating_W(np.zeros(2), np.array([0.0, 2.0]), np.array([1.0, 0.0]))
    with pytest.raises(PreconditionError):
        construct_separating_W(np.zeros(2), np.array([1.0, 0.0]), np.array([3.0, 0.0]))
    with pytest.raises(ArgumentError):
        construct_separating_W(np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 2.0]), beta=0.6)


@given(st.integers(0, 2**31 - 1))
def test_separating_maps_property(seed):
    z1, z2, z3 = random_valid_triple(np.random.default_rng(seed))
    assert separating_margin(z1, z2, z3, "single") > 0.0
    assert separating_margin(z1, z2, z3, "pair") > 0.0


def test_separating_check_thousand_triples():
    res = check_separating(1000)
    assert res.passed, res.line()
