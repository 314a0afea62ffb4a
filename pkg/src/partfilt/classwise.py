"""Feature-space partitioning (k-means) and per-cluster linear transforms."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, GraphIndexError, PreconditionError, ShapeError


def _sq_dists(Z, centroids):
    diff = Z[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _plusplus(Z, c, rng):
    n = Z.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(Z, Z[chosen])[:, 0]
    for _ in range(1, c):
        total = d2.sum()
        if total <= 0.0:
            # every point sits on a centre already; take the lowest unused id
            taken = set(chosen)
            nxt = next(i for i in range(n) if i not in taken)
        else:
            cdf = np.cumsum(d2 / total)
            nxt = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            nxt = min(nxt, n - 1)
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(Z, Z[[nxt]])[:, 0])
    return Z[chosen].copy()


def kmeans(Z, c: int, seed: int = 0, max_iter: int = 100, return_trace: bool = False):
    """Lloyd's algorithm with seeded k-means++ initialization.

    Returns ``(assign, centroids)`` and, with ``return_trace``, the objective
    after every iteration. Distance ties go to the lowest cluster id; an empty
    cluster takes the point farthest from its current centroid.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    n = Z.shape[0]
    if c < 1 or n < c:
        raise ArgumentError(f"k-means needs 1 <= c <= n (got c={c}, n={n})")
    rng = np.random.default_rng(seed)
    centroids = _plusplus(Z, c, rng)
    assign = None
    trace = []
    for _ in range(max_iter):
        d2 = _sq_dists(Z, centroids)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=c)
        for j in np.flatnonzero(counts == 0):
            own = d2[np.arange(n), new]
            # only steal from clusters that keep at least one member
            own = np.where(counts[new] > 1, own, -1.0)
            far = int(np.argmax(own))
            counts[new[far]] -= 1
            new[far] = j
            counts[j] = 1
        converged = assign is not None and np.array_equal(new, assign)
        assign = new
        for j in range(c):
            centroids[j] = Z[assign == j].mean(axis=0)
        trace.append(float(_sq_dists(Z, centroids)[np.arange(n), assign].sum()))
        if converged:
            break
    if return_trace:
        return assign, centroids, trace
    return assign, centroids


def kmeans_objective(Z, assign, centroids) -> float:
    Z = np.asarray(Z, dtype=np.float64)
    return float(((Z - centroids[assign]) ** 2).sum())


def classwise_filter(Z, assign, W) -> np.ndarray:
    """Row ``i`` of the output is ``Z[i] @ W[assign[i]]``."""
    Z = np.asarray(Z, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    assign = np.asarray(assign)
    if W.ndim != 3 or W.shape[1] != Z.shape[1]:
        raise ShapeError(f"W stack shape {W.shape} does not match embedding width {Z.shape[1]}")
    if assign.shape[0] != Z.shape[0]:
        raise ShapeError("one cluster id per row is required")
    if assign.size and (assign.min() < 0 or assign.max() >= W.shape[0]):
        raise GraphIndexError(f"cluster id outside [0, {W.shape[0]})")
    return np.einsum("ij,ijk->ik", Z, W[assign])


def _complete_basis(cols: np.ndarray) -> np.ndarray:
    """Append an orthonormal basis of the orthogonal complement of ``cols``."""
    c = cols.shape[0]
    q, _ = np.linalg.qr(cols, mode="complete")
    return np.hstack([cols, q[:, cols.shape[1]:c]])


def construct_separating_W(z1, z2, z3, variant: str = "single", beta: float | None = None):
    """Linear maps that make ``z3`` closer to ``z1`` than ``z2`` is.

    ``single``: one ``W`` fixing ``u = z1 - z2`` and shrinking ``v = z1 - z3``
    by ``beta`` (default ``|u| / (2 |v|)``), identity on the complement.
    ``pair``: ``W1 = I`` and ``W2 = z1 z3^T / |z3|^2`` so that ``W2 z3 = z1``.
    """
    z1, z2, z3 = (np.asarray(z, dtype=np.float64).ravel() for z in (z1, z2, z3))
    u, v = z1 - z2, z1 - z3
    d12, d13 = np.linalg.norm(u), np.linalg.norm(v)
    if not d12 < d13:
        raise PreconditionError(f"need d12 < d13 (got {d12:.6g} >= {d13:.6g})")
    if d12 == 0.0:
        raise PreconditionError("z1 == z2: no map can make a zero distance the larger one")
    c = z1.size
    if variant == "pair":
        nz3 = z3 @ z3
        if nz3 == 0.0:
            raise PreconditionError("z3 must be non-zero")
        return np.eye(c), np.outer(z1, z3) / nz3
    if variant != "single":
        raise ArgumentError(f"unknown variant {variant!r}")
    pair = np.column_stack([u, v])
    sv = np.linalg.svd(pair, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        # v = t u with |t| > 1 forces |Wv| = |t| |Wu| for every linear W
        raise PreconditionError("z1 - z2 and z1 - z3 are collinear; a single map cannot reverse them")
    if beta is None:
        beta = d12 / (2.0 * d13)
    if not 0.0 < beta < d12 / d13:
        raise ArgumentError(f"beta must lie in (0, {d12 / d13:.6g})")
    B = _complete_basis(pair)
    scale = np.ones(c)
    scale[1] = beta
    # columns are images of the basis vectors; rows act on column vectors
    return (B * scale) @ np.linalg.inv(B)
