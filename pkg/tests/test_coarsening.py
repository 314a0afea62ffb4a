import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs, path_graph
from partfilt.coarsening import (
    Partition,
    coarsen,
    coarsening_operator,
    coarsening_subspace,
    read_partition,
    rsa_constant,
    rsa_lower_bound,
    target_size,
    theorem_bound_audit,
    write_partition,
)
from partfilt.errors import ArgumentError, DegenerateSubspaceError, ParseError, ShapeError
from partfilt.graph import from_edges, normalized_laplacian
from partfilt.synthetic import erdos_renyi
from partfilt.verification import barbell6, exhaustive_min_rsa


@st.composite
def partitions(draw, max_n=30):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, n))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    assign = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    return Partition(rng.permutation(assign), k)


def generalized_rsa_oracle(lap, p, V):
    """Independent route: dense Pi, scipy's generalized eigensolver on the range part."""
    Pi = coarsening_operator(p).pi_dense()
    L = lap.dense()
    R = (np.eye(lap.n) - Pi) @ V
    G = V.T @ L @ V
    M = R.T @ L @ R
    return float(np.sqrt(max(scipy.linalg.eigh(M, G, eigvals_only=True)[-1], 0.0)))


def test_extreme_ratios():
    g = erdos_renyi(12, 0.3, 0)
    ident = coarsen(g, 0.0)
    assert ident.n_prime == 12 and np.array_equal(ident.assign, np.arange(12))
    single = coarsen(g, 11 / 12)
    assert single.n_prime == 1 and np.all(single.assign == 0)


@pytest.mark.parametrize("r", [-0.1, 1.0, 1.5, float("nan")])
def test_ratio_out_of_range(r):
    with pytest.raises(ArgumentError):
        coarsen(path_graph(5), r)


def test_unknown_method_and_bad_dim():
    with pytest.raises(ArgumentError):
        coarsen(path_graph(5), 0.5, method="spectral")
    with pytest.raises(ArgumentError):
        coarsen(path_graph(5), 0.5, subspace_dim=0)


def test_barbell_splits_into_triangles():
    g = barbell6()
    lap = normalized_laplacian(g)
    p = coarsen(g, 2 / 3, subspace_dim=2, lap=lap)
    assert p.assign.tolist() == [0, 0, 0, 1, 1, 1]
    _, V = coarsening_subspace(lap, 2)
    eps = rsa_constant(lap, coarsening_operator(p), V)
    assert eps == pytest.approx(exhaustive_min_rsa(lap, 2, V), abs=1e-9)


def test_operator_two_nodes_merged():
    op = coarsening_operator(Partition.single(2))
    assert np.array_equal(op.C.toarray(), [[0.5, 0.5]])
    assert np.array_equal(op.C_plus.toarray(), [[1.0], [1.0]])
    assert np.array_equal(op.pi_dense(), [[0.5, 0.5], [0.5, 0.5]])


def test_operator_identity():
    op = coarsening_operator(Partition.identity(4))
    assert np.array_equal(op.C.toarray(), np.eye(4))
    assert np.array_equal(op.pi_dense(), np.eye(4))


def test_c_plus_matches_pseudo_inverse():
    p = Partition(np.array([0, 1, 2, 0, 1, 0, 2, 2]), 3)
    op = coarsening_operator(p)
    np.testing.assert_allclose(op.C_plus.toarray(), np.linalg.pinv(op.C.toarray()), atol=1e-10)


def test_partition_rejects_empty_supernode():
    with pytest.raises(ShapeError):
        Partition(np.array([0, 0, 2]), 3)


@given(partitions())
def test_operator_invariants(p):
    op = coarsening_operator(p)
    C, Cp = op.C.toarray(), op.C_plus.toarray()
    np.testing.assert_allclose(C.sum(axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(C @ Cp, np.eye(p.n_prime), atol=1e-12)
    Pi = op.pi_dense()
    assert np.abs(Pi @ Pi - Pi).max() <= 1e-12
    assert np.abs(Pi - Pi.T).max() <= 1e-15
    assert p.sizes.sum() == p.n


@given(partitions(), st.integers(0, 2**31 - 1))
def test_block_mean_law(p, seed):
    x = np.random.default_rng(seed).standard_normal(p.n)
    px = coarsening_operator(p).project(x)
    for j in range(p.n):
        total = 0.0
        for u in range(p.n):
            if p.assign[u] == p.assign[j]:
                total += x[u]
        assert px[j] == total / p.sizes[p.assign[j]]


def test_identity_partition_rsa_zero():
    g = erdos_renyi(20, 0.3, 1)
    lap = normalized_laplacian(g)
    _, V = coarsening_subspace(lap, 5)
    assert rsa_constant(lap, coarsening_operator(Partition.identity(20)), V) == 0.0


def test_null_direction_excluded():
    g = erdos_renyi(10, 0.6, 2)
    assert g.components()[0] == 1
    lap = normalized_laplacian(g)
    op = coarsening_operator(Partition.single(10))
    assert rsa_constant(lap, op, lap.null_vector()[:, None]) == 0.0


def test_k2_merged_rsa_is_one():
    lap = normalized_laplacian(from_edges(2, [(0, 1)]))
    eps = rsa_constant(lap, coarsening_operator(Partition.single(2)), np.array([[1.0], [0.0]]))
    assert eps == pytest.approx(1.0, abs=1e-12)


def test_dependent_subspace():
    lap = normalized_laplacian(path_graph(6))
    v = np.random.default_rng(0).standard_normal(6)
    with pytest.raises(DegenerateSubspaceError):
        rsa_constant(lap, coarsening_operator(Partition.single(6)), np.column_stack([v, 2 * v]))


@pytest.mark.parametrize("seed", range(10))
def test_rsa_matches_generalized_eigen_oracle(seed):
    g = erdos_renyi(24, 0.25, seed)
    lap = normalized_laplacian(g)
    p = coarsen(g, 0.5, lap=lap)
    _, V = coarsening_subspace(lap, 6)
    eps = rsa_constant(lap, coarsening_operator(p), V)
    assert eps == pytest.approx(generalized_rsa_oracle(lap, p, V), abs=1e-9)
    assert rsa_lower_bound(lap, coarsening_operator(p), V, samples=64) <= eps + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_rsa_monotone_in_subspace(seed):
    g = erdos_renyi(24, 0.25, seed)
    lap = normalized_laplacian(g)
    op = coarsening_operator(coarsen(g, 0.5, lap=lap))
    _, V = coarsening_subspace(lap, 10)
    eps = [rsa_constant(lap, op, V[:, :m]) for m in range(1, 11)]
    assert all(b >= a - 1e-12 for a, b in zip(eps, eps[1:]))


@given(graphs(min_n=2, max_n=30), st.floats(0.0, 1.0), st.sampled_from(["local_variation", "heavy_edge"]))
def test_coarsen_size_determinism_components(g, frac, method):
    n = g.n
    r = frac * (n - 1) / n
    p = coarsen(g, r, method=method, subspace_dim=3, seed=1)
    assert p.n_prime == target_size(n, r)
    assert p.n_prime == max(1, int(np.floor((1 - r) * n + 1e-9)))
    assert coarsen(g, r, method=method, subspace_dim=3, seed=1).digest() == p.digest()
    ncomp, comp = g.components()
    if p.n_prime >= ncomp:
        for i in range(p.n_prime):
            assert np.unique(comp[p.assign == i]).size == 1


def test_forced_component_merge_smallest_first():
    # components {0,1,2}, {3,4}, {5}: going to two supernodes merges {5} into {3,4}
    g = from_edges(6, [(0, 1), (1, 2), (3, 4)])
    p = coarsen(g, 4 / 6, subspace_dim=2)
    assert p.assign.tolist() == [0, 0, 0, 1, 1, 1]


def test_audit_identity_partition_is_exact():
    g = erdos_renyi(16, 0.3, 3)
    lap = normalized_laplacian(g)
    _, V = coarsening_subspace(lap, 4)
    x = np.random.default_rng(0).standard_normal(16)
    a = theorem_bound_audit(lap, coarsening_operator(Partition.identity(16)), x, 3, V)
    assert a.lhs == 0.0 and a.lhs_k_step == 0.0 and a.holds


def test_audit_null_signal_on_regular_graph():
    # on a regular graph D^{1/2} 1 is constant, so every block mean fixes it
    from conftest import cycle_graph

    g = cycle_graph(12)
    lap = normalized_laplacian(g)
    _, V = coarsening_subspace(lap, 4)
    op = coarsening_operator(coarsen(g, 0.5, lap=lap))
    a = theorem_bound_audit(lap, op, 3.0 * lap.null_vector(), 1, V)
    assert a.lhs == pytest.approx(0.0, abs=1e-7)
    assert a.holds


def test_audit_rejects_k_zero():
    lap = normalized_laplacian(path_graph(4))
    with pytest.raises(ArgumentError):
        theorem_bound_audit(lap, coarsening_operator(Partition.single(4)), np.ones(4), 0, np.eye(4)[:, :1])


def test_audit_er_k2_holds():
    for seed in range(100):
        g = erdos_renyi(32, 0.2, seed)
        lap = normalized_laplacian(g)
        op = coarsening_operator(coarsen(g, 0.5, lap=lap))
        _, V = coarsening_subspace(lap, 10)
        x = np.random.default_rng(seed).standard_normal(32)
        a = theorem_bound_audit(lap, op, x, 2, V)
        assert a.lhs <= a.rhs + 1e-8


def test_partition_file_roundtrip(tmp_path):
    p = coarsen(erdos_renyi(20, 0.3, 5), 0.5)
    write_partition(tmp_path / "p.txt", p)
    q = read_partition(tmp_path / "p.txt")
    assert q.n_prime == p.n_prime and np.array_equal(q.assign, p.assign)
    (tmp_path / "bad.txt").write_text("0\n1\n")
    with pytest.raises(ParseError):
        read_partition(tmp_path / "bad.txt")
