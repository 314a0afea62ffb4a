"""Dense eigendecomposition oracle and L-seminorm machinery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericError, ScaleError, ShapeError
from .graph import Laplacian

N_MAX = 2048
NULL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenSystem:
    U: np.ndarray
    lam: np.ndarray

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def range_mask(self, tol: float = NULL_TOL) -> np.ndarray:
        return self.lam > tol


def _fix_signs(U: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    # first component with |u| > tol is made positive
    U = U.copy()
    big = np.abs(U) > tol
    first = np.argmax(big, axis=0)
    signs = np.sign(U[first, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def dense_eig(lap: Laplacian | np.ndarray, n_max: int = N_MAX) -> EigenSystem:
    """Full eigendecomposition of L, ascending, with a fixed sign convention."""
    mat = lap.dense() if isinstance(lap, Laplacian) else np.asarray(lap, dtype=np.float64)
    n = mat.shape[0]
    if n > n_max:
        raise ScaleError(
            f"n={n} exceeds dense limit n_max={n_max}; use the polynomial (recurrence) path"
        )
    lam, U = np.linalg.eigh(mat)
    return EigenSystem(_fix_signs(U), lam)


def low_eigenvectors(lap: Laplacian, k: int, n_max: int = N_MAX, seed: int = 0):
    """The ``k`` smallest eigenpairs of L.

    Dense below ``n_max``; above it a Lanczos solve on ``2I - L`` (largest end)
    with a seeded start vector so results are reproducible.
    """
    n = lap.n
    k = min(k, n)
    if n <= n_max or k >= n - 1:
        es = dense_eig(lap, n_max=max(n_max, n))
        return es.lam[:k], es.U[:, :k]
    shifted = sp.identity(n, format="csr") * 2.0 - lap.L
    v0 = np.random.default_rng(seed).standard_normal(n)
    vals, vecs = spla.eigsh(shifted, k=k, which="LA", v0=v0, tol=1e-10)
    lam = 2.0 - vals
    order = np.argsort(lam, kind="stable")
    return lam[order], _fix_signs(vecs[:, order])


def exact_spectral_filter(eig: EigenSystem, f, x: np.ndarray) -> np.ndarray:
    """``U diag(f(lambda)) U^T x`` for a vector or a column-stacked matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != eig.n:
        raise ShapeError(f"signal length {x.shape[0]} != n={eig.n}")
    resp = np.asarray(f(eig.lam), dtype=np.float64)
    if resp.shape != eig.lam.shape:
        resp = np.broadcast_to(resp, eig.lam.shape)
    if not np.all(np.isfinite(resp)):
        raise NumericError("filter response is not finite on the spectrum")
    coeffs = eig.U.T @ x
    if x.ndim == 1:
        return eig.U @ (resp * coeffs)
    return eig.U @ (resp[:, None] * coeffs)


def l_seminorm(lap: Laplacian, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != lap.n:
        raise ShapeError(f"signal length {x.shape[0]} != n={lap.n}")
    q = float(x @ (lap.L @ x))
    if q < -1e-12:
        raise NumericError(f"x^T L x = {q} < 0; Laplacian is not PSD")
    return float(np.sqrt(max(q, 0.0)))


def _sqrt_pair(eig: EigenSystem, tol: float = NULL_TOL):
    keep = eig.range_mask(tol)
    r = np.sqrt(np.where(keep, eig.lam, 0.0))
    rinv = np.where(keep, 1.0 / np.where(keep, r, 1.0), 0.0)
    S = (eig.U * r) @ eig.U.T
    S_pinv = (eig.U * rinv) @ eig.U.T
    return S, S_pinv


def l_operator_seminorm(lap: Laplacian, M, eig: EigenSystem | None = None, n_max: int = N_MAX) -> float:
    """``sup ||Mx||_L`` over ``x`` in range(L) with ``||x||_L = 1``.

    Evaluated as the spectral norm of ``L^{1/2} M (L^{1/2})^+``; eigenvalues
    below 1e-10 count as nullspace.
    """
    if lap.n > n_max:
        raise ScaleError(f"n={lap.n} exceeds dense limit n_max={n_max}")
    if eig is None:
        eig = dense_eig(lap, n_max=n_max)
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)
    S, S_pinv = _sqrt_pair(eig)
    return float(np.linalg.norm(S @ M @ S_pinv, 2))
