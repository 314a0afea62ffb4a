"""Training loop, evaluation, splits and model checkpoints."""

from __future__ import annotations

import copy
import csv
import itertools
import json
import struct
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .classwise import kmeans
from .coarsening import Partition, coarsen, coarsening_operator
from .errors import ArgumentError, NumericError, ParseError, ShapeError, TrainingError
from .filtering import PolyBasis, propagate_basis
from .graph import Graph, Laplacian, normalized_laplacian
from .model import Context, ModelSpec, accuracy, backward, decay_keys, forward, init_params, softmax_cross_entropy

GRID = {
    "lr": (0.5, 0.1, 0.05, 0.01, 0.005, 0.001),
    "weight_decay": (5e-2, 5e-4, 0.0),
    "dropout": (0.0, 0.5),
}
CHECKPOINT_MAGIC = b"PFMD"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    max_epochs: int = 1000
    patience: int = 200
    K: int = 10
    r: float = 0.5
    basis: str = "chebyshev"
    jacobi_a: float = 1.0
    jacobi_b: float = 1.0
    hidden: int = 64
    layers: int = 2
    order: str = "medium"
    activation: str = "relu"
    method: str = "local_variation"
    subspace_dim: int = 10
    classwise: bool = True
    kmeans_start: int = 20
    kmeans_refresh: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0 or self.weight_decay < 0:
            raise ArgumentError("lr and weight_decay must be non-negative")
        if self.max_epochs < 1 or self.patience < 1:
            raise ArgumentError("max_epochs and patience must be positive")
        if self.layers < 1:
            raise ArgumentError("layers must be >= 1")
        if self.kmeans_refresh < 1 or self.kmeans_start < 0:
            raise ArgumentError("kmeans_refresh >= 1 and kmeans_start >= 0 required")

    @property
    def poly_basis(self) -> PolyBasis:
        return PolyBasis(self.basis, self.K, self.jacobi_a, self.jacobi_b)

    def model_spec(self, in_dim: int, num_classes: int) -> ModelSpec:
        hidden = (self.hidden,) * (self.layers - 1)
        return ModelSpec(in_dim, num_classes, hidden, self.poly_basis, self.order, self.activation, self.dropout)

    def check_grid(self) -> None:
        for key, values in GRID.items():
            if getattr(self, key) not in values:
                raise ArgumentError(f"{key}={getattr(self, key)} is not on the tuning grid {values}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        parts = [np.asarray(p, dtype=np.int64) for p in (self.train, self.val, self.test)]
        self.train, self.val, self.test = parts
        allidx = np.concatenate(parts)
        if np.unique(allidx).size != allidx.size:
            raise ArgumentError("train/val/test index sets overlap")

    def items(self):
        return (("train", self.train), ("val", self.val), ("test", self.test))


def random_split(n: int, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> Split:
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ArgumentError("split fractions must be three numbers summing to 1")
    perm = np.random.default_rng(seed).permutation(n)
    n_tr = int(round(fractions[0] * n))
    n_va = int(round(fractions[1] * n))
    return Split(np.sort(perm[:n_tr]), np.sort(perm[n_tr:n_tr + n_va]), np.sort(perm[n_tr + n_va:]))


class Adam:
    """Adam with L2 weight decay folded into the gradient for selected keys."""

    def __init__(self, lr, weight_decay=0.0, decay=(), beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.weight_decay = lr, weight_decay
        self.decay = set(decay)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params: dict, grads: dict, keys=None) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k in keys if keys is not None else grads:
            g = grads[k]
            if self.weight_decay and k in self.decay:
                g = g + self.weight_decay * params[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass
class MetricsLog:
    rows: list = field(default_factory=list)

    COLUMNS = ("epoch", "train_loss", "train_acc", "val_acc")

    def append(self, epoch, train_loss, train_acc, val_acc):
        self.rows.append({"epoch": epoch, "train_loss": train_loss, "train_acc": train_acc, "val_acc": val_acc})

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=self.COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


@dataclass(eq=False)
class TrainedModel:
    spec: ModelSpec
    params: dict
    partition: Partition
    clusters: np.ndarray | None
    config: TrainConfig
    best_epoch: int = 0
    best_val: float = float("nan")

    @property
    def filter_parameter_count(self) -> int:
        return int(self.params["theta"].size)

    @property
    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def context(self, g: Graph, lap: Laplacian | None = None, stack=None) -> Context:
        lap = lap or normalized_laplacian(g)
        X = _features(g)
        if self.spec.order == "large" and stack is None:
            stack = propagate_basis(lap, X, self.spec.basis)
        return Context(lap, coarsening_operator(self.partition), X, stack)

    def logits(self, g: Graph, ctx: Context | None = None) -> np.ndarray:
        ctx = ctx or self.context(g)
        out, _ = forward(self.spec, self.params, ctx, self.clusters, train=False)
        return out


def _features(g: Graph) -> np.ndarray:
    if g.features is None:
        return np.eye(g.n)
    return g.features


def evaluate(model: TrainedModel, g: Graph, split: Split, ctx: Context | None = None) -> dict:
    logits = model.logits(g, ctx)
    return {name: accuracy(logits, g.labels, idx) for name, idx in split.items()}


def train(
    g: Graph,
    config: TrainConfig,
    split: Split,
    partition: Partition | None = None,
    lap: Laplacian | None = None,
    stack=None,
    verbose: bool = False,
) -> tuple[TrainedModel, MetricsLog]:
    """Full-batch training with early stopping on validation accuracy.

    The returned model is the checkpoint with the best validation accuracy
    (earliest on ties); training stops once ``patience`` epochs pass without
    improvement.
    """
    if g.labels is None:
        raise ArgumentError("training needs node labels")
    if split.train.size == 0:
        raise ArgumentError("empty training split")
    lap = lap or normalized_laplacian(g)
    if partition is None:
        partition = coarsen(g, config.r, config.method, config.subspace_dim, config.seed, lap=lap)
    if partition.n != g.n:
        raise ShapeError(f"partition covers {partition.n} nodes, graph has {g.n}")
    X = _features(g)
    c = g.num_classes
    spec = config.model_spec(X.shape[1], c)
    if spec.order == "large" and stack is None:
        stack = propagate_basis(lap, X, spec.basis)
    ctx = Context(lap, coarsening_operator(partition), X, stack)

    rng = np.random.default_rng(config.seed)
    params = init_params(spec, partition.n_prime, rng)
    opt = Adam(config.lr, config.weight_decay, decay_keys(params))
    y = g.labels
    log = MetricsLog()
    clusters = None
    best = (-1.0, 0, copy.deepcopy(params), None)
    for epoch in range(config.max_epochs):
        try:
            if (
                config.classwise
                and epoch >= config.kmeans_start
                and (epoch - config.kmeans_start) % config.kmeans_refresh == 0
            ):
                _, cache = forward(spec, params, ctx, None, train=False)
                clusters, _ = kmeans(cache["Z"], c, seed=config.seed + epoch)

            logits, cache = forward(spec, params, ctx, clusters, train=True, rng=rng)
            loss, dlogits = softmax_cross_entropy(logits, y, split.train)
            if not np.isfinite(loss):
                raise TrainingError(f"loss became {loss} at epoch {epoch} (lr={config.lr})")
            grads = backward(spec, params, ctx, cache, dlogits)
            bad = [k for k, v in grads.items() if not np.all(np.isfinite(v))]
            if bad:
                raise TrainingError(f"non-finite gradient for {bad} at epoch {epoch} (lr={config.lr})")
            keys = [k for k in grads if k != "W" or clusters is not None]
            opt.step(params, grads, keys)

            out, _ = forward(spec, params, ctx, clusters, train=False)
        except NumericError as exc:
            # non-finite activations reach the propagation step before the loss
            raise TrainingError(f"training diverged at epoch {epoch} (lr={config.lr}): {exc}") from exc
        tr_acc = accuracy(out, y, split.train)
        va_acc = accuracy(out, y, split.val) if split.val.size else tr_acc
        log.append(epoch, loss, tr_acc, va_acc)
        if verbose and epoch % 50 == 0:
            print(f"epoch {epoch:4d} loss {loss:.4f} train {tr_acc:.4f} val {va_acc:.4f}")
        if va_acc > best[0]:
            best = (va_acc, epoch, copy.deepcopy(params), None if clusters is None else clusters.copy())
        elif epoch - best[1] >= config.patience:
            break
    model = TrainedModel(spec, best[2], partition, best[3], config, best[1], best[0])
    return model, log


def grid_search(g: Graph, base: TrainConfig, split: Split, partition=None, lap=None, grid=GRID):
    """Train every grid point; return ``(best_model, best_log, results)``."""
    lap = lap or normalized_laplacian(g)
    if partition is None:
        partition = coarsen(g, base.r, base.method, base.subspace_dim, base.seed, lap=lap)
    results = []
    best = None
    for lr, wd, dp in itertools.product(grid["lr"], grid["weight_decay"], grid["dropout"]):
        cfg = TrainConfig(**{**asdict(base), "lr": lr, "weight_decay": wd, "dropout": dp})
        try:
            model, log = train(g, cfg, split, partition=partition, lap=lap)
        except TrainingError:
            results.append({"lr": lr, "weight_decay": wd, "dropout": dp, "val_acc": float("nan")})
            continue
        results.append({"lr": lr, "weight_decay": wd, "dropout": dp, "val_acc": model.best_val})
        if best is None or model.best_val > best[0].best_val:
            best = (model, log)
    if best is None:
        raise TrainingError("every grid point diverged")
    return best[0], best[1], results


# -- checkpoint -----------------------------------------------------------------


def save_model(path, model: TrainedModel) -> None:
    tensors = dict(model.params)
    tensors["partition"] = model.partition.assign.astype(np.float64)
    if model.clusters is not None:
        tensors["clusters"] = model.clusters.astype(np.float64)
    header = {
        "version": CHECKPOINT_VERSION,
        "spec": {
            "in_dim": model.spec.in_dim,
            "num_classes": model.spec.num_classes,
            "hidden": list(model.spec.hidden),
            "basis": model.spec.basis.tag,
            "K": model.spec.basis.K,
            "order": model.spec.order,
            "activation": model.spec.activation,
            "dropout": model.spec.dropout,
        },
        "config": asdict(model.config),
        "n_prime": model.partition.n_prime,
        "partition_sha256": model.partition.digest(),
        "best_epoch": model.best_epoch,
        "best_val": model.best_val,
        "tensors": [[k, list(v.shape)] for k, v in tensors.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for v in tensors.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ParseError("not a PFMD checkpoint", path)
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", path)
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    off = 12 + hlen
    tensors = {}
    for name, shape in header["tensors"]:
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
        off += 8 * size
        tensors[name] = arr
    if off != len(data):
        raise ParseError("trailing bytes after checkpoint tensors", path)
    s = header["spec"]
    spec = ModelSpec(
        s["in_dim"], s["num_classes"], tuple(s["hidden"]), PolyBasis.from_tag(s["basis"], s["K"]),
        s["order"], s["activation"], s["dropout"],
    )
    partition = Partition(tensors.pop("partition").astype(np.int64), header["n_prime"])
    if partition.digest() != header["partition_sha256"]:
        raise ParseError("partition hash mismatch", path)
    clusters = tensors.pop("clusters", None)
    if clusters is not None:
        clusters = clusters.astype(np.int64)
    config = TrainConfig.from_dict(header["config"])
    return TrainedModel(spec, tensors, partition, clusters, config, header["best_epoch"], header["best_val"])
