"""Polynomial basis propagation and graph-, node- and partition-wise filters.

Chebyshev, monomial and Jacobi terms are evaluated on ``delta = L - I``
(spectrum inside [-1, 1]); Bernstein terms on ``L / 2`` (spectrum in [0, 1]).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import comb

import numpy as np

from .coarsening import CoarseningOperator, Partition, coarsening_operator
from .errors import ArgumentError, NumericError, ParseError, ShapeError
from .graph import Laplacian

KINDS = ("monomial", "chebyshev", "bernstein", "jacobi")
STACK_MAGIC = b"PFST"


@dataclass(frozen=True)
class PolyBasis:
    kind: str = "chebyshev"
    K: int = 10
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown basis {self.kind!r}; choose from {KINDS}")
        if self.K < 0:
            raise ArgumentError("K must be >= 0")
        if self.kind == "jacobi" and (self.a <= -1 or self.b <= -1):
            raise ArgumentError("Jacobi parameters must exceed -1")

    @property
    def tag(self) -> str:
        if self.kind == "jacobi":
            return f"jacobi:{self.a!r}:{self.b!r}"
        return self.kind

    @classmethod
    def from_tag(cls, tag: str, K: int) -> "PolyBasis":
        if tag.startswith("jacobi:"):
            _, a, b = tag.split(":")
            return cls("jacobi", K, float(a), float(b))
        return cls(tag, K)

    def recurrence(self, k: int) -> tuple[float, float, float]:
        """``(alpha, beta, gamma)`` with ``T_k = (alpha D + beta) T_{k-1} - gamma T_{k-2}``."""
        if self.kind == "monomial":
            return 1.0, 0.0, 0.0
        if self.kind == "chebyshev":
            return (1.0, 0.0, 0.0) if k == 1 else (2.0, 0.0, 1.0)
        if self.kind == "jacobi":
            a, b = self.a, self.b
            if k == 1:
                return (a + b + 2.0) / 2.0, (a - b) / 2.0, 0.0
            c = 2.0 * k + a + b
            den = 2.0 * k * (k + a + b) * (c - 2.0)
            return (
                (c - 1.0) * c * (c - 2.0) / den,
                (c - 1.0) * (a * a - b * b) / den,
                2.0 * (k + a - 1.0) * (k + b - 1.0) * c / den,
            )
        raise ArgumentError("bernstein has no three-term recurrence")


@dataclass(frozen=True, eq=False)
class PropagatedStack:
    """``slices[k] = T_k(.) X``, shape ``(K + 1, n, d)``."""

    slices: np.ndarray
    basis: PolyBasis

    @property
    def K(self) -> int:
        return self.slices.shape[0] - 1

    @property
    def n(self) -> int:
        return self.slices.shape[1]

    @property
    def d(self) -> int:
        return self.slices.shape[2]


def _as_2d(X):
    X = np.asarray(X, dtype=np.float64)
    return X[:, None] if X.ndim == 1 else X


def _bernstein_terms(lap: Laplacian, Ys, K: int) -> np.ndarray:
    """``sum_k binom(K,k) (I - L/2)^{K-k} (L/2)^k Ys[k]`` computed per k."""
    out = None
    for k, y in enumerate(Ys):
        t = y
        for _ in range(k):
            t = 0.5 * (lap.L @ t)
        for _ in range(K - k):
            t = t - 0.5 * (lap.L @ t)
        t = comb(K, k) * t
        out = t if out is None else out + t
    return out


def propagate_basis(lap: Laplacian, X, basis: PolyBasis) -> PropagatedStack:
    X = _as_2d(X)
    if X.shape[0] != lap.n:
        raise ShapeError(f"X has {X.shape[0]} rows, graph has n={lap.n}")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite values in X")
    K = basis.K
    out = np.empty((K + 1,) + X.shape)
    if basis.kind == "bernstein":
        powers = [X]
        for _ in range(K):
            powers.append(0.5 * (lap.L @ powers[-1]))
        for k in range(K + 1):
            t = powers[k]
            for _ in range(K - k):
                t = t - 0.5 * (lap.L @ t)
            out[k] = comb(K, k) * t
        return PropagatedStack(out, basis)
    D = lap.delta
    out[0] = X
    for k in range(1, K + 1):
        alpha, beta, gamma = basis.recurrence(k)
        t = alpha * (D @ out[k - 1])
        if beta:
            t += beta * out[k - 1]
        if gamma:
            t -= gamma * out[k - 2]
        out[k] = t
    return PropagatedStack(out, basis)


def propagate_adjoint(lap: Laplacian, grads: np.ndarray, basis: PolyBasis) -> np.ndarray:
    """``sum_k T_k^T grads[k]``: the input gradient of ``propagate_basis``.

    Every basis term is a polynomial in a symmetric matrix, so the transpose is
    the term itself; three-term recurrences are reversed in place.
    """
    grads = np.asarray(grads, dtype=np.float64)
    K = grads.shape[0] - 1
    if basis.kind == "bernstein":
        return _bernstein_terms(lap, list(grads), K)
    D = lap.delta
    g = grads.copy()
    for k in range(K, 0, -1):
        alpha, beta, gamma = basis.recurrence(k)
        g[k - 1] += alpha * (D @ g[k])
        if beta:
            g[k - 1] += beta * g[k]
        if gamma:
            g[k - 2] -= gamma * g[k]
    return g[0]


def basis_response(basis: PolyBasis, k: int, lam: np.ndarray) -> np.ndarray:
    """Scalar response of term ``k`` on Laplacian eigenvalues (closed forms)."""
    from numpy.polynomial import chebyshev
    from scipy.special import eval_jacobi

    lam = np.asarray(lam, dtype=np.float64)
    x = lam - 1.0
    if basis.kind == "monomial":
        return x**k
    if basis.kind == "chebyshev":
        return chebyshev.chebval(x, np.eye(k + 1)[k])
    if basis.kind == "jacobi":
        return eval_jacobi(k, basis.a, basis.b, x)
    K = basis.K
    h = lam / 2.0
    return comb(K, k) * (1.0 - h) ** (K - k) * h**k


# -- filters ------------------------------------------------------------------


def graphwise_filter(theta, stack: PropagatedStack) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).ravel()
    if theta.size != stack.K + 1:
        raise ShapeError(f"theta has {theta.size} coefficients, stack has K+1={stack.K + 1}")
    z = np.zeros(stack.slices.shape[1:])
    for k in range(stack.K + 1):
        z += theta[k] * stack.slices[k]
    return z


def nodewise_filter(theta_full, stack: PropagatedStack) -> np.ndarray:
    theta_full = np.asarray(theta_full, dtype=np.float64)
    if theta_full.shape != (stack.n, stack.K + 1):
        raise ShapeError(f"theta_full shape {theta_full.shape} != {(stack.n, stack.K + 1)}")
    z = np.zeros(stack.slices.shape[1:])
    for k in range(stack.K + 1):
        z += theta_full[:, k, None] * stack.slices[k]
    return z


def _operator(op) -> CoarseningOperator:
    return coarsening_operator(op) if isinstance(op, Partition) else op


def partitionwise_filter(op: CoarseningOperator | Partition, theta, stack: PropagatedStack) -> np.ndarray:
    """``Z = sum_k diag(C+ Theta[:, k]) T_k X``.

    ``Theta`` is ``n' x (K+1)`` and already carries the ``1/|V_i|`` factor.
    """
    op = _operator(op)
    theta = np.asarray(theta, dtype=np.float64)
    p = op.partition
    if p.n != stack.n:
        raise ShapeError(f"partition covers {p.n} nodes, stack has n={stack.n}")
    if theta.shape != (p.n_prime, stack.K + 1):
        raise ShapeError(f"Theta shape {theta.shape} != {(p.n_prime, stack.K + 1)}")
    per_node = op.C_plus @ theta
    return nodewise_filter(per_node, stack)


def partitionwise_reference(p: Partition, theta_raw, stack: PropagatedStack) -> np.ndarray:
    """Unoptimized per-partition evaluation, kept as a test oracle.

    For each partition: average of one-hot sifted rows of
    ``sum_k theta_raw[i, k] T_k X`` over its members, summed over partitions.
    """
    theta_raw = np.asarray(theta_raw, dtype=np.float64)
    if p.n != stack.n:
        raise ShapeError(f"partition covers {p.n} nodes, stack has n={stack.n}")
    if theta_raw.shape != (p.n_prime, stack.K + 1):
        raise ShapeError(f"theta shape {theta_raw.shape} != {(p.n_prime, stack.K + 1)}")
    n = stack.n
    Z = np.zeros(stack.slices.shape[1:])
    for i in range(p.n_prime):
        members = p.members(i)
        filtered = np.zeros_like(Z)
        for k in range(stack.K + 1):
            filtered += theta_raw[i, k] * stack.slices[k]
        part = np.zeros_like(Z)
        for m in members:
            delta_m = np.zeros(n)
            delta_m[m] = 1.0
            part += delta_m[:, None] * filtered
        Z += part / members.size
    return Z


def nodewise_reference(lap: Laplacian, theta_full, X, basis: PolyBasis) -> np.ndarray:
    """Node-wise filtering with one full propagation per node (O(n E d K))."""
    X = _as_2d(X)
    theta_full = np.asarray(theta_full, dtype=np.float64)
    Z = np.empty_like(X)
    for i in range(X.shape[0]):
        stack = propagate_basis(lap, X, basis)
        Z[i] = graphwise_filter(theta_full[i], stack)[i]
    return Z


# -- stack cache file ---------------------------------------------------------


def write_stack(path, stack: PropagatedStack) -> None:
    tag = stack.basis.tag.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(STACK_MAGIC)
        fh.write(struct.pack("<H", len(tag)))
        fh.write(tag)
        fh.write(struct.pack("<QQQ", stack.K, stack.n, stack.d))
        fh.write(np.ascontiguousarray(stack.slices, dtype="<f8").tobytes())


def read_stack(path) -> PropagatedStack:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != STACK_MAGIC:
        raise ParseError("not a PFST stack file", path)
    (tlen,) = struct.unpack_from("<H", data, 4)
    off = 6 + tlen
    tag = data[6:off].decode("ascii")
    K, n, d = struct.unpack_from("<QQQ", data, off)
    off += 24
    body = data[off:]
    expected = 8 * (K + 1) * n * d
    if len(body) != expected:
        raise ParseError(f"payload is {len(body)} bytes, expected {expected}", path)
    slices = np.frombuffer(body, dtype="<f8").reshape(K + 1, n, d).astype(np.float64)
    return PropagatedStack(slices, PolyBasis.from_tag(tag, K))
