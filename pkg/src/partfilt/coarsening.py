"""Spectral graph coarsening, coarsening operators and the RSA constant."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, DegenerateSubspaceError, ParseError, ShapeError
from .graph import Graph, Laplacian, normalized_laplacian
from .spectral import N_MAX, NULL_TOL, EigenSystem, dense_eig, l_operator_seminorm, l_seminorm, low_eigenvectors

METHODS = ("local_variation", "heavy_edge")


@dataclass(frozen=True, eq=False)
class Partition:
    assign: np.ndarray
    n_prime: int

    def __post_init__(self):
        a = np.asarray(self.assign, dtype=np.int64).ravel()
        object.__setattr__(self, "assign", a)
        if a.size and (a.min() < 0 or a.max() >= self.n_prime):
            raise ShapeError(f"supernode ids must lie in [0, {self.n_prime})")
        if np.any(np.bincount(a, minlength=self.n_prime) == 0):
            raise ShapeError("partition has an empty supernode")

    @property
    def n(self) -> int:
        return int(self.assign.shape[0])

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assign, minlength=self.n_prime)

    @property
    def ratio(self) -> float:
        return 1.0 - self.n_prime / self.n

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assign == i)

    def digest(self) -> str:
        return hashlib.sha256(self.assign.astype("<i8").tobytes()).hexdigest()

    @classmethod
    def identity(cls, n: int) -> "Partition":
        return cls(np.arange(n), n)

    @classmethod
    def single(cls, n: int) -> "Partition":
        return cls(np.zeros(n, dtype=np.int64), 1)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Relabel arbitrary ids so supernodes are numbered by lowest member."""
        labels = np.asarray(labels).ravel()
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.size)
        return cls(rank[inv], first.size)


@dataclass(frozen=True, eq=False)
class CoarseningOperator:
    """``C`` (n' x n, rows sum to one), ``C+`` and the block-mean projector."""

    partition: Partition
    C: sp.csr_matrix
    C_plus: sp.csr_matrix

    @property
    def sizes(self) -> np.ndarray:
        return self.partition.sizes

    def project(self, x: np.ndarray) -> np.ndarray:
        """``Pi x``: every entry replaced by the mean over its supernode."""
        x = np.asarray(x, dtype=np.float64)
        a = self.partition.assign
        m = self.sizes
        if x.ndim == 1:
            means = np.bincount(a, weights=x, minlength=m.size) / m
            return means[a]
        sums = np.zeros((m.size, x.shape[1]))
        np.add.at(sums, a, x)
        return (sums / m[:, None])[a]

    def pi_dense(self) -> np.ndarray:
        return (self.C_plus @ self.C).toarray()


def coarsening_operator(p: Partition) -> CoarseningOperator:
    n, k = p.n, p.n_prime
    m = p.sizes.astype(np.float64)
    rows, cols = p.assign, np.arange(n)
    C = sp.csr_matrix((1.0 / m[rows], (rows, cols)), shape=(k, n))
    C.sort_indices()
    # rows of C are orthogonal with squared norm 1/m_i, so C+ = C^T diag(m)
    C_plus = sp.csr_matrix((np.ones(n), (cols, rows)), shape=(n, k))
    C_plus.sort_indices()
    return CoarseningOperator(p, C, C_plus)


# -- coarsening ----------------------------------------------------------------


def target_size(n: int, r: float) -> int:
    """``floor((1 - r) n)`` guarded against round-off, clamped to [1, n]."""
    return int(min(n, max(1, math.floor((1.0 - r) * n + 1e-9))))


def check_ratio(n: int, r: float) -> None:
    hi = (n - 1) / n if n > 0 else 0.0
    if not (np.isfinite(r) and -1e-12 <= r <= hi + 1e-12):
        raise ArgumentError(f"coarsening ratio r={r} outside [0, {hi:.6g}] for n={n}")


def coarsening_subspace(lap: Laplacian, dim: int, seed: int = 0, n_max: int = N_MAX) -> tuple[np.ndarray, np.ndarray]:
    """Leading ``dim`` eigenvectors of L outside its nullspace."""
    n = lap.n
    deg = lap.degrees
    nz = deg > 0
    # one null eigenvector per component that has at least one edge
    n_null = 0
    if nz.any():
        a = sp.csr_matrix(lap.L)
        ncomp, lab = sp.csgraph.connected_components(a, directed=False)
        n_null = np.unique(lab[nz]).size
    k = min(n, dim + n_null)
    lam, U = low_eigenvectors(lap, k, n_max=n_max, seed=seed)
    keep = lam > NULL_TOL
    return lam[keep][:dim], U[:, keep][:, :dim]


def _membership(assign: np.ndarray, k: int) -> sp.csr_matrix:
    n = assign.size
    return sp.csr_matrix((np.ones(n), (np.arange(n), assign)), shape=(n, k))


def _lv_scores(lap, V, g, assign, k):
    P = _membership(assign, k)
    sizes = np.bincount(assign, minlength=k).astype(np.float64)
    Lc = sp.csr_matrix(P.T @ lap.L @ P)
    up = sp.triu(Lc, k=1).tocoo()
    a, b, lab = up.row, up.col, up.data
    keep = lab != 0
    a, b, lab = a[keep], b[keep], lab[keep]
    diag = Lc.diagonal()
    ma, mb = sizes[a], sizes[b]
    s = ma + mb
    # merging A and B adds (mean_A - mean_B) h with h = (m_B/s) 1_A - (m_A/s) 1_B
    hlh = (mb / s) ** 2 * diag[a] + (ma / s) ** 2 * diag[b] - 2.0 * (ma * mb / s**2) * lab
    Vc = np.asarray(P.T @ V) / sizes[:, None]
    w = Vc[a] - Vc[b]
    cost = np.maximum(hlh, 0.0) * ((w * w) @ g)
    return a, b, cost


def _heavy_scores(g: Graph, assign, k):
    P = _membership(assign, k)
    Ac = sp.csr_matrix(P.T @ g.adjacency @ P)
    vol = np.asarray(P.T @ g.degrees).ravel()
    up = sp.triu(Ac, k=1).tocoo()
    a, b, w = up.row, up.col, up.data
    keep = w != 0
    a, b, w = a[keep], b[keep], w[keep]
    weight = w / np.sqrt(vol[a] * vol[b])
    return a, b, -weight


def _merge_pairs(assign, pairs):
    k = assign.max() + 1
    parent = np.arange(k)
    for a, b in pairs:
        parent[b] = a
    return Partition.from_labels(parent[assign]).assign


def coarsen(
    g: Graph,
    r: float,
    method: str = "local_variation",
    subspace_dim: int = 10,
    seed: int = 0,
    lap: Laplacian | None = None,
) -> Partition:
    """Greedy multilevel contraction of adjacent supernode pairs.

    ``local_variation`` ranks candidate pairs by the growth of the restricted
    residual ``sup ||x - Pi x||_L`` they cause inside the span of the leading
    ``subspace_dim`` non-null Laplacian eigenvectors; each level contracts the
    cheapest disjoint pairs, at most half of the merges still needed.
    ``heavy_edge`` contracts maximal matchings by descending normalized cut
    weight. Pairs never straddle components until only whole components are
    left; those are then merged smallest-first.
    """
    if method not in METHODS:
        raise ArgumentError(f"unknown coarsening method {method!r}; choose from {METHODS}")
    n = g.n
    check_ratio(n, r)
    if subspace_dim < 1:
        raise ArgumentError("subspace_dim must be >= 1")
    target = target_size(n, r)
    if target >= n:
        return Partition.identity(n)
    if lap is None:
        lap = normalized_laplacian(g)
    if method == "local_variation":
        lam, V = coarsening_subspace(lap, subspace_dim, seed=seed)
        gains = 1.0 / lam

    assign = np.arange(n, dtype=np.int64)
    k = n
    while k > target:
        need = k - target
        if method == "local_variation":
            a, b, score = _lv_scores(lap, V, gains, assign, k)
            cap = max(1, math.ceil(need / 2))
        else:
            a, b, score = _heavy_scores(g, assign, k)
            cap = need
        if a.size == 0:
            sizes = np.bincount(assign, minlength=k)
            order = np.lexsort((np.arange(k), sizes))
            x, y = sorted(order[:2])
            assign = _merge_pairs(assign, [(x, y)])
            k -= 1
            continue
        order = np.lexsort((b, a, score))
        used = np.zeros(k, dtype=bool)
        chosen = []
        for idx in order:
            x, y = a[idx], b[idx]
            if used[x] or used[y]:
                continue
            used[x] = used[y] = True
            chosen.append((x, y))
            if len(chosen) == cap:
                break
        assign = _merge_pairs(assign, chosen)
        k -= len(chosen)
    return Partition(assign, k)


# -- restricted spectral approximation ------------------------------------------


def _orthonormal_basis(subspace: np.ndarray) -> np.ndarray:
    V = np.asarray(subspace, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[1] == 0:
        return V
    s = np.linalg.svd(V, compute_uv=False)
    if s[-1] <= 1e-10 * max(s[0], 1e-300):
        raise DegenerateSubspaceError("subspace columns are linearly dependent")
    Q, _ = np.linalg.qr(V)
    return Q


def rsa_constant(lap: Laplacian, op: CoarseningOperator, subspace: np.ndarray) -> float:
    """``sup ||x - Pi x||_L`` over ``x`` in the subspace with ``||x||_L = 1``.

    Solved as a generalized symmetric eigenproblem on the subspace; the
    directions of zero L-seminorm inside it are dropped.
    """
    V = _orthonormal_basis(subspace)
    if V.shape[0] != lap.n:
        raise ShapeError(f"subspace has {V.shape[0]} rows, graph has n={lap.n}")
    if V.shape[1] == 0:
        return 0.0
    LV = lap.L @ V
    G = V.T @ LV
    G = 0.5 * (G + G.T)
    R = V - op.project(V)
    M = R.T @ (lap.L @ R)
    M = 0.5 * (M + M.T)
    gval, Q = np.linalg.eigh(G)
    keep = gval > NULL_TOL
    if not keep.any():
        return 0.0
    T = Q[:, keep] / np.sqrt(gval[keep])
    top = np.linalg.eigvalsh(T.T @ M @ T)[-1]
    return float(np.sqrt(max(top, 0.0)))


def rsa_lower_bound(lap: Laplacian, op: CoarseningOperator, subspace: np.ndarray, samples: int = 256, seed: int = 0) -> float:
    """Sampled lower bound on the RSA constant for graphs beyond the dense limit."""
    V = np.asarray(subspace, dtype=np.float64)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        x = V @ rng.standard_normal(V.shape[1])
        den = l_seminorm(lap, x)
        if den <= 1e-12:
            continue
        best = max(best, l_seminorm(lap, x - op.project(x)) / den)
    return best


@dataclass(frozen=True)
class BoundAudit:
    lhs: float
    rhs: float
    lhs_k_step: float
    lhs_k_step_rel: float
    eps: float
    x_norm: float
    delta_norm: float
    pi_delta_norm: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-8


def theorem_bound_audit(
    lap: Laplacian,
    op: CoarseningOperator,
    x: np.ndarray,
    k: int,
    subspace: np.ndarray,
    eig: EigenSystem | None = None,
) -> BoundAudit:
    """Both sides of the one-step propagation bound plus the k-step error.

    ``lhs = ||D^k x - Pi D Pi D^{k-1} x||_L`` and
    ``rhs = eps ||x||_L (||D||_L + ||Pi D||_L)`` with ``D = L - I``;
    ``lhs_k_step = ||D^k x - (Pi D Pi)^k x||_L``, also reported relative to
    ``||D^k x||_L``.
    """
    if k < 1:
        raise ArgumentError("k must be >= 1")
    if eig is None:
        eig = dense_eig(lap)
    delta = lap.delta
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    for _ in range(k - 1):
        y = delta @ y
    dk = delta @ y
    approx = op.project(delta @ op.project(y))
    lhs = l_seminorm(lap, dk - approx)

    z = x.copy()
    for _ in range(k):
        z = op.project(delta @ op.project(z))
    lhs_k = l_seminorm(lap, dk - z)
    dk_norm = l_seminorm(lap, dk)
    lhs_k_rel = lhs_k / dk_norm if dk_norm > 1e-12 else 0.0

    eps = rsa_constant(lap, op, subspace)
    dd = delta.toarray()
    nd = l_operator_seminorm(lap, dd, eig=eig)
    npd = l_operator_seminorm(lap, op.pi_dense() @ dd, eig=eig)
    xn = l_seminorm(lap, x)
    return BoundAudit(lhs, eps * xn * (nd + npd), lhs_k, lhs_k_rel, eps, xn, nd, npd)


# -- partition file --------------------------------------------------------------


def write_partition(path, p: Partition) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#n_prime {p.n_prime}\n")
        fh.write("".join(f"{int(v)}\n" for v in p.assign))


def read_partition(path) -> Partition:
    path = Path(path)
    n_prime = None
    ids = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "n_prime":
                    try:
                        n_prime = int(parts[1])
                    except ValueError:
                        raise ParseError(f"bad n_prime {parts[1]!r}", path, lineno) from None
                continue
            try:
                ids.append(int(line))
            except ValueError:
                raise ParseError(f"non-integer supernode id {line!r}", path, lineno) from None
    if n_prime is None:
        raise ParseError("missing '#n_prime <N>' header", path)
    return Partition(np.array(ids, dtype=np.int64), n_prime)
