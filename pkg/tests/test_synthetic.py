import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partfilt.coarsening import Partition
from partfilt.errors import ArgumentError
from partfilt.graph import edge_homophily, normalized_laplacian
from partfilt.synthetic import (
    HETERO,
    HOMO,
    PARADIGMS,
    CSBMParams,
    csbm_generate,
    hybrid_experiment,
    hybrid_partition,
    separated_means,
    write_regimes,
)
from partfilt.training import TrainConfig, evaluate, random_split, train


def _edge_set(g):
    return {tuple(e) for e in g.edges.tolist()}


def test_two_cliques():
    s = csbm_generate(CSBMParams(n=30, p0=1.0, q0=0.0, P=1.0, seed=4))
    y = s.graph.labels
    want = {(i, j) for i in range(30) for j in range(i + 1, 30) if y[i] == y[j]}
    assert _edge_set(s.graph) == want
    assert np.all(s.regime == HOMO)


def test_complete_bipartite():
    s = csbm_generate(CSBMParams(n=30, p1=0.0, q1=1.0, P=0.0, seed=4))
    y = s.graph.labels
    want = {(i, j) for i in range(30) for j in range(i + 1, 30) if y[i] != y[j]}
    assert _edge_set(s.graph) == want
    assert np.all(s.regime == HETERO)


def test_lower_id_endpoint_decides_regime():
    # node 0 homophilic, everyone else heterophilic with no heterophilic edges at all
    n = 12
    for seed in range(20):
        s = csbm_generate(CSBMParams(n=n, p0=1.0, q0=0.0, p1=0.0, q1=0.0 + 1e-12, P=1 / n, seed=seed))
        h = int(np.flatnonzero(s.regime == HOMO)[0])
        y = s.graph.labels
        want = {(h, j) for j in range(h + 1, n) if y[j] == y[h]}
        assert _edge_set(s.graph) == want


def test_homophily_average_over_seeds():
    vals = [edge_homophily(csbm_generate(CSBMParams(n=400, p0=0.1, q0=0.01, P=1.0, seed=s)).graph) for s in range(20)]
    # independent estimate: expected same-class pairs over expected linked pairs
    n = 400
    same = 2 * (n / 2) * (n / 2 - 1) / 2
    diff = (n / 2) ** 2
    expected = 0.1 * same / (0.1 * same + 0.01 * diff)
    assert np.mean(vals) >= 0.85
    assert np.mean(vals) == pytest.approx(expected, abs=0.01)


@settings(max_examples=25)
@given(
    st.integers(2, 120),
    st.floats(0.0, 1.0),
    st.floats(0.05, 0.9),
    st.floats(0.05, 0.9),
    st.integers(0, 2**31 - 1),
)
def test_csbm_invariants(n, P, a, b, seed):
    params = CSBMParams(n=n, p0=max(a, b), q0=min(a, b) * 0.5, p1=min(a, b) * 0.5, q1=max(a, b), P=P, seed=seed)
    s = csbm_generate(params)
    assert int((s.regime == HOMO).sum()) == int(round(P * n))
    assert abs(s.graph.num_edges - s.expected_edges) <= 5 * s.edge_std + 1e-9
    again = csbm_generate(params)
    assert again.graph.edges.tobytes() == s.graph.edges.tobytes()
    assert again.graph.features.tobytes() == s.graph.features.tobytes()
    assert np.array_equal(again.regime, s.regime)


def test_params_validation():
    with pytest.raises(ArgumentError):
        CSBMParams(p0=0.01, q0=0.05)
    with pytest.raises(ArgumentError):
        CSBMParams(p1=0.1, q1=0.05)
    with pytest.raises(ArgumentError):
        CSBMParams(P=1.5)
    with pytest.raises(ArgumentError):
        CSBMParams(p0=1.2)
    with pytest.raises(ArgumentError):
        CSBMParams(mu=np.zeros(3), nu=np.zeros(4))
    mu, nu = separated_means(5, 3.0)
    assert np.linalg.norm(mu - nu) == pytest.approx(3.0)


def test_hybrid_partition_structure():
    p = hybrid_partition(np.array([HETERO, HOMO, HETERO, HOMO, HOMO]))
    assert p.assign.tolist() == [0, 1, 2, 1, 1]
    assert p.n_prime == 3
    assert hybrid_partition(np.full(4, HOMO)).n_prime == 1
    assert hybrid_partition(np.full(4, HETERO)).n_prime == 4


def test_regime_file(tmp_path):
    write_regimes(tmp_path / "r.txt", np.array([0, 1, 1]))
    assert (tmp_path / "r.txt").read_text() == "0\n1\n1\n"


FAST = dict(lr=0.01, weight_decay=0.0, dropout=0.0, max_epochs=200, patience=100, K=2, hidden=32)


def test_pure_homophily_graphwise_matches_nodewise():
    gw, nw = [], []
    for seed in range(5):
        s = csbm_generate(CSBMParams(n=400, P=1.0, seed=seed))
        g = s.graph
        lap = normalized_laplacian(g)
        split = random_split(g.n, seed=seed)
        cfg = TrainConfig(**FAST, seed=seed)
        m_g, _ = train(g, cfg, split, partition=Partition.single(g.n), lap=lap)
        m_n, _ = train(g, cfg, split, partition=Partition.identity(g.n), lap=lap)
        assert m_g.filter_parameter_count == cfg.K + 1
        assert m_n.filter_parameter_count == g.n * (cfg.K + 1)
        gw.append(evaluate(m_g, g, split)["test"])
        nw.append(evaluate(m_n, g, split)["test"])
    # the shared filter never trails the per-node filter by more than 1%
    assert np.mean(gw) >= np.mean(nw) - 0.01


def test_trivially_separable_features():
    mu, nu = separated_means(8, 20.0)
    params = CSBMParams(n=200, mu=mu, nu=nu, seed=1)
    rep = hybrid_experiment(params, TrainConfig(**FAST, seed=1))
    for name in PARADIGMS:
        assert rep.test_acc[name] >= 0.99, (name, rep.test_acc)
    rows = rep.rows()
    assert [r["paradigm"] for r in rows] == list(PARADIGMS)
    assert rep.filter_params["graph-wise"] == 3
    assert rep.filter_params["node-wise"] == 200 * 3
    assert all(0.0 <= r["test_acc"] <= 1.0 for r in rows)
