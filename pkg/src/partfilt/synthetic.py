"""Two-class contextual stochastic block model and the hybrid filtering experiment."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .coarsening import Partition, coarsen
from .errors import ArgumentError
from .graph import Graph, edge_homophily, from_edges, normalized_laplacian
from .training import TrainConfig, random_split, train, evaluate

HOMO, HETERO = 0, 1
PARADIGMS = ("graph-wise", "node-wise", "hybrid", "partition-wise")


def separated_means(d: int, separation: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``mu = -nu`` along the first axis with ``|mu - nu| = separation``."""
    mu = np.zeros(d)
    mu[0] = separation / 2.0
    return mu, -mu


@dataclass
class CSBMParams:
    n: int = 400
    mu: np.ndarray = field(default_factory=lambda: separated_means(8)[0])
    nu: np.ndarray = field(default_factory=lambda: separated_means(8)[1])
    sigma: float = 1.0
    p0: float = 0.05
    q0: float = 0.005
    p1: float = 0.005
    q1: float = 0.05
    P: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64).ravel()
        self.nu = np.asarray(self.nu, dtype=np.float64).ravel()
        if self.mu.shape != self.nu.shape:
            raise ArgumentError("mu and nu must have the same length")
        for name in ("p0", "q0", "p1", "q1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ArgumentError(f"{name}={v} is not a probability")
        if not self.p0 > self.q0:
            raise ArgumentError("the homophilic regime needs p0 > q0")
        if not self.p1 < self.q1:
            raise ArgumentError("the heterophilic regime needs p1 < q1")
        if not 0.0 <= self.P <= 1.0:
            raise ArgumentError("P must lie in [0, 1]")
        if self.n < 1 or self.sigma < 0:
            raise ArgumentError("n >= 1 and sigma >= 0 required")

    @property
    def n_homo(self) -> int:
        return int(round(self.P * self.n))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mu"] = self.mu.tolist()
        d["nu"] = self.nu.tolist()
        return d


@dataclass(frozen=True, eq=False)
class CSBMGraph:
    graph: Graph
    regime: np.ndarray  # 0 homophilic, 1 heterophilic
    edge_prob: np.ndarray  # probability used for every pair i < j (row-major upper triangle)

    @property
    def expected_edges(self) -> float:
        return float(self.edge_prob.sum())

    @property
    def edge_std(self) -> float:
        return float(np.sqrt((self.edge_prob * (1.0 - self.edge_prob)).sum()))


def csbm_generate(params: CSBMParams) -> CSBMGraph:
    """Sample labels, regime tags, Gaussian features and edges.

    A pair ``i < j`` is linked with the regime of ``i`` deciding between
    ``(p0, q0)`` and ``(p1, q1)``, and class agreement picking ``p`` or ``q``.
    """
    rng = np.random.default_rng(params.seed)
    n = params.n
    labels = rng.integers(0, 2, size=n)
    regime = np.full(n, HETERO, dtype=np.int64)
    regime[rng.permutation(n)[: params.n_homo]] = HOMO
    means = np.where(labels[:, None] == 0, params.mu[None, :], params.nu[None, :])
    X = means + params.sigma * rng.standard_normal((n, params.mu.size))

    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    homo = regime[iu] == HOMO
    prob = np.where(homo, np.where(same, params.p0, params.q0), np.where(same, params.p1, params.q1))
    keep = rng.random(prob.size) < prob
    pairs = np.column_stack([iu[keep], ju[keep]])
    g = from_edges(n, pairs, X, labels, 2)
    return CSBMGraph(g, regime, prob)


def write_regimes(path, regime: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{int(t)}\n" for t in regime)


def hybrid_partition(regime: np.ndarray) -> Partition:
    """One shared block for homophilic nodes, a singleton for each heterophilic node."""
    regime = np.asarray(regime)
    assign = np.empty(regime.size, dtype=np.int64)
    homo_id = None
    nxt = 0
    for i, t in enumerate(regime):
        if t == HOMO:
            if homo_id is None:
                homo_id, nxt = nxt, nxt + 1
            assign[i] = homo_id
        else:
            assign[i], nxt = nxt, nxt + 1
    return Partition(assign, nxt)


@dataclass
class SeparabilityReport:
    seed: int
    train_acc: dict
    test_acc: dict
    val_acc: dict
    filter_params: dict
    total_params: dict
    edge_homophily: float

    def rows(self) -> list[dict]:
        return [
            {
                "seed": self.seed,
                "paradigm": name,
                "train_acc": self.train_acc[name],
                "val_acc": self.val_acc[name],
                "test_acc": self.test_acc[name],
                "filter_params": self.filter_params[name],
                "total_params": self.total_params[name],
            }
            for name in PARADIGMS
        ]


def hybrid_experiment(params: CSBMParams, config: TrainConfig, split_seed: int | None = None) -> SeparabilityReport:
    """Train graph-, node-, hybrid- and partition-wise filters on one CSBM draw."""
    sample = csbm_generate(params)
    g = sample.graph
    lap = normalized_laplacian(g)
    split = random_split(g.n, seed=params.seed if split_seed is None else split_seed)
    partitions = {
        "graph-wise": Partition.single(g.n),
        "node-wise": Partition.identity(g.n),
        "hybrid": hybrid_partition(sample.regime),
        "partition-wise": coarsen(g, config.r, config.method, config.subspace_dim, config.seed, lap=lap),
    }
    tr, va, te, fp, tp = {}, {}, {}, {}, {}
    for name in PARADIGMS:
        model, _ = train(g, config, split, partition=partitions[name], lap=lap)
        acc = evaluate(model, g, split)
        tr[name], va[name], te[name] = acc["train"], acc["val"], acc["test"]
        fp[name] = model.filter_parameter_count
        tp[name] = model.parameter_count
    return SeparabilityReport(params.seed, tr, te, va, fp, tp, edge_homophily(g))


def erdos_renyi(n: int, p: float, seed: int = 0, d: int | None = None) -> Graph:
    """G(n, p) with optional standard-normal features of width ``d``."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    X = rng.standard_normal((n, d)) if d else None
    return from_edges(n, np.column_stack([iu[keep], ju[keep]]), X)
