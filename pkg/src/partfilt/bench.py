"""Timing sweeps for partition-wise filtering against the node-wise reference."""

from __future__ import annotations

import time

import numpy as np

from .coarsening import Partition, coarsening_operator, target_size
from .filtering import PolyBasis, nodewise_reference, partitionwise_filter, propagate_basis
from .graph import Graph, from_edges, normalized_laplacian


def random_graph(n: int, m: int, d: int = 8, seed: int = 0) -> Graph:
    """Uniform random simple graph with about ``m`` edges and Gaussian features."""
    rng = np.random.default_rng(seed)
    # oversample, then keep the first m distinct non-loop pairs
    pairs = rng.integers(0, n, size=(int(m * 1.3) + 16, 2))
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.sort(pairs, axis=1)
    _, first = np.unique(pairs, axis=0, return_index=True)
    pairs = pairs[np.sort(first)][:m]
    return from_edges(n, pairs, rng.standard_normal((n, d)))


def random_partition(n: int, r: float, seed: int = 0) -> Partition:
    rng = np.random.default_rng(seed)
    k = target_size(n, r)
    assign = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    return Partition(rng.permutation(assign), k)


def best_time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return float(best)


def bench_edges(
    n: int = 400,
    degrees=(4, 8, 16),
    d: int = 8,
    K: int = 10,
    r: float = 0.5,
    repeats: int = 3,
    seed: int = 0,
    reference: bool = True,
) -> list[dict]:
    """Time both filters on the same graphs over an edge-count sweep at fixed ``n``.

    The partition-wise timing covers basis propagation plus filtering; the
    node-wise reference repeats the propagation once per node.
    """
    basis = PolyBasis("chebyshev", K)
    rows = []
    for i, deg in enumerate(degrees):
        g = random_graph(n, n * deg // 2, d, seed + i)
        lap = normalized_laplacian(g)
        op = coarsening_operator(random_partition(n, r, seed))
        rng = np.random.default_rng(seed)
        theta = rng.standard_normal((op.partition.n_prime, K + 1))
        theta_full = rng.standard_normal((n, K + 1))

        def run():
            partitionwise_filter(op, theta, propagate_basis(lap, g.features, basis))

        rows.append({"filter": "partition-wise", "n": n, "edges": g.num_edges, "seconds": best_time(run, repeats)})
        if reference:
            t = best_time(lambda: nodewise_reference(lap, theta_full, g.features, basis), repeats)
            rows.append({"filter": "node-wise-reference", "n": n, "edges": g.num_edges, "seconds": t})
    return rows


def bench_nodes(sizes=(1000, 2000, 4000), degree: int = 8, d: int = 8, K: int = 10, r: float = 0.5, repeats: int = 3, seed: int = 0) -> list[dict]:
    basis = PolyBasis("chebyshev", K)
    rows = []
    for i, n in enumerate(sizes):
        g = random_graph(n, n * degree // 2, d, seed + i)
        lap = normalized_laplacian(g)
        op = coarsening_operator(random_partition(n, r, seed))
        theta = np.random.default_rng(seed).standard_normal((op.partition.n_prime, K + 1))
        t = best_time(lambda: partitionwise_filter(op, theta, propagate_basis(lap, g.features, basis)), repeats)
        rows.append({"filter": "partition-wise", "n": n, "edges": g.num_edges, "seconds": t})
    return rows


def loglog_exponent(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def linear_rate(x, y) -> float:
    """Least-squares slope of ``y`` against ``x`` (seconds per unit)."""
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def summarize(rows: list[dict]) -> dict:
    """Fitted exponents and per-edge growth rates for each filter in ``rows``."""
    out = {}
    for name in sorted({r["filter"] for r in rows}):
        sub = sorted((r for r in rows if r["filter"] == name), key=lambda r: r["edges"])
        e = [r["edges"] for r in sub]
        t = [r["seconds"] for r in sub]
        out[name] = {
            "exponent": loglog_exponent(e, t),
            "rate": linear_rate(e, t),
            "edge_span": e[-1] / e[0],
            "time_span": t[-1] / t[0],
        }
    return out
