"""CPF network: MLP, partition-wise filtering and class-wise transforms.

Two decoupled orders are supported:

* ``medium``: ``H = MLP(X)``, then partition-wise filtering of ``H`` (the basis
  is propagated on every forward pass), then class-wise transforms.
* ``large``: partition-wise filtering of a precomputed stack over ``X``, then
  the MLP, then class-wise transforms.

Gradients are derived by hand; k-means cluster ids enter as constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classwise import classwise_filter
from .coarsening import CoarseningOperator
from .errors import ArgumentError, ShapeError
from .filtering import PolyBasis, PropagatedStack, partitionwise_filter, propagate_adjoint, propagate_basis
from .graph import Laplacian

ORDERS = ("medium", "large")


@dataclass(frozen=True)
class ModelSpec:
    in_dim: int
    num_classes: int
    hidden: tuple[int, ...] = (64,)
    basis: PolyBasis = field(default_factory=PolyBasis)
    order: str = "medium"
    activation: str = "relu"
    dropout: float = 0.0

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ArgumentError(f"unknown order {self.order!r}; choose from {ORDERS}")
        if self.activation not in ("relu", "linear"):
            raise ArgumentError("activation must be 'relu' or 'linear'")
        if not 0.0 <= self.dropout < 1.0:
            raise ArgumentError("dropout must lie in [0, 1)")

    @property
    def dims(self) -> list[int]:
        return [self.in_dim, *self.hidden, self.num_classes]

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1


@dataclass(frozen=True, eq=False)
class Context:
    """Fixed graph-side inputs of a forward pass."""

    lap: Laplacian
    op: CoarseningOperator
    X: np.ndarray
    stack: PropagatedStack | None = None  # required for the large order


def init_params(spec: ModelSpec, n_prime: int, rng: np.random.Generator, theta_noise: float = 0.01) -> dict:
    params = {}
    dims = spec.dims
    for l in range(spec.n_layers):
        fan_in, fan_out = dims[l], dims[l + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"w{l}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{l}"] = np.zeros(fan_out)
    K = spec.basis.K
    theta = np.zeros((n_prime, K + 1))
    theta[:, 0] = 1.0
    params["theta"] = theta + theta_noise * rng.standard_normal(theta.shape)
    c = spec.num_classes
    params["W"] = np.repeat(np.eye(c)[None], c, axis=0)
    return params


def decay_keys(params: dict) -> list[str]:
    return [k for k in params if not k.startswith("b")]


def _mlp_forward(spec, params, A, train, rng):
    cache = []
    for l in range(spec.n_layers):
        mask = None
        if train and spec.dropout > 0.0:
            keep = 1.0 - spec.dropout
            mask = (rng.random(A.shape) < keep) / keep
            A = A * mask
        pre = A @ params[f"w{l}"] + params[f"b{l}"]
        cache.append((A, pre, mask))
        last = l == spec.n_layers - 1
        A = pre if last or spec.activation == "linear" else np.maximum(pre, 0.0)
    return A, cache


def _mlp_backward(spec, params, cache, dout, grads):
    g = dout
    for l in range(spec.n_layers - 1, -1, -1):
        A, pre, mask = cache[l]
        if l != spec.n_layers - 1 and spec.activation == "relu":
            g = g * (pre > 0.0)
        grads[f"w{l}"] = A.T @ g
        grads[f"b{l}"] = g.sum(axis=0)
        g = g @ params[f"w{l}"].T
        if mask is not None:
            g = g * mask
    return g


def _filter_grads(op, stack, theta, dZ):
    per_node = op.C_plus @ theta
    # d loss / d per-node coefficient k = <dZ[i], slice_k[i]>
    G = np.einsum("kij,ij->ik", stack.slices, dZ)
    dtheta = np.asarray(op.C_plus.T @ G)
    dslices = per_node.T[:, :, None] * dZ[None]
    return dtheta, dslices


def forward(spec: ModelSpec, params: dict, ctx: Context, clusters=None, train=False, rng=None):
    """Logits of shape ``(n, c)`` and a cache for :func:`backward`.

    ``clusters`` (one id per node) switches the class-wise transforms on;
    ``None`` leaves the filtered embedding untouched.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    cache = {"clusters": clusters}
    width = ctx.X.shape[1] if spec.order == "medium" or ctx.stack is None else ctx.stack.d
    if width != spec.in_dim:
        raise ShapeError(f"input width {width} != model in_dim {spec.in_dim}")
    if params["theta"].shape[0] != ctx.op.partition.n_prime:
        raise ShapeError("theta rows do not match the partition size")
    if spec.order == "medium":
        H, cache["mlp"] = _mlp_forward(spec, params, ctx.X, train, rng)
        stack = propagate_basis(ctx.lap, H, spec.basis)
        Z = partitionwise_filter(ctx.op, params["theta"], stack)
    else:
        if ctx.stack is None:
            raise ShapeError("the large order needs a precomputed propagation stack")
        stack = ctx.stack
        Hf = partitionwise_filter(ctx.op, params["theta"], stack)
        Z, cache["mlp"] = _mlp_forward(spec, params, Hf, train, rng)
    cache["stack"] = stack
    cache["Z"] = Z
    out = Z if clusters is None else classwise_filter(Z, clusters, params["W"])
    return out, cache


def backward(spec: ModelSpec, params: dict, ctx: Context, cache: dict, dout: np.ndarray) -> dict:
    grads = {}
    clusters = cache["clusters"]
    Z = cache["Z"]
    if clusters is None:
        grads["W"] = np.zeros_like(params["W"])
        dZ = dout
    else:
        W = params["W"]
        dW = np.zeros_like(W)
        np.add.at(dW, clusters, Z[:, :, None] * dout[:, None, :])
        grads["W"] = dW
        dZ = np.einsum("ik,ijk->ij", dout, W[clusters])
    if spec.order == "medium":
        dtheta, dslices = _filter_grads(ctx.op, cache["stack"], params["theta"], dZ)
        grads["theta"] = dtheta
        dH = propagate_adjoint(ctx.lap, dslices, spec.basis)
        _mlp_backward(spec, params, cache["mlp"], dH, grads)
    else:
        dHf = _mlp_backward(spec, params, cache["mlp"], dZ, grads)
        grads["theta"], _ = _filter_grads(ctx.op, cache["stack"], params["theta"], dHf)
    return grads


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray, idx: np.ndarray):
    """Mean cross-entropy over ``idx`` and its gradient w.r.t. all logits."""
    idx = np.asarray(idx)
    if idx.size == 0:
        raise ArgumentError("empty index set")
    sub = logits[idx]
    shift = sub - sub.max(axis=1, keepdims=True)
    logp = shift - np.log(np.exp(shift).sum(axis=1, keepdims=True))
    y = labels[idx]
    loss = -logp[np.arange(idx.size), y].mean()
    p = np.exp(logp)
    p[np.arange(idx.size), y] -= 1.0
    grad = np.zeros_like(logits)
    grad[idx] = p / idx.size
    return float(loss), grad


def accuracy(logits: np.ndarray, labels: np.ndarray, idx) -> float:
    """Argmax accuracy; ties resolve to the lowest class id."""
    idx = np.asarray(idx)
    if idx.size == 0:
        return float("nan")
    return float((np.argmax(logits[idx], axis=1) == labels[idx]).mean())
