"""Graph container, file ingestion, normalized Laplacian and homophily."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GraphIndexError, ParseError, PreconditionError, ShapeError

FEATURE_MAGIC = b"PFLT"


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted graph.

    ``edges`` holds each undirected pair once as ``(i, j)`` with ``i <= j``,
    sorted lexicographically; self-loops appear only when ingested with
    ``keep_self_loops=True``.
    """

    n: int
    edges: np.ndarray
    features: np.ndarray | None = None
    labels: np.ndarray | None = None
    num_classes: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                bad = edges[(edges < 0).any(axis=1) | (edges >= self.n).any(axis=1)][0]
                raise GraphIndexError(f"edge ({bad[0]}, {bad[1]}) out of range for n={self.n}")
        if self.features is not None:
            x = np.asarray(self.features, dtype=np.float64)
            if x.ndim == 1:
                x = x[:, None]
            if x.shape[0] != self.n:
                raise ShapeError(f"feature rows {x.shape[0]} != n={self.n}")
            object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64).ravel()
            if y.shape[0] != self.n:
                raise ShapeError(f"label count {y.shape[0]} != n={self.n}")
            if y.size and y.min() < 0:
                raise GraphIndexError("negative label id")
            c = self.num_classes or (int(y.max()) + 1 if y.size else 0)
            if y.size and y.max() >= c:
                raise GraphIndexError(f"label id {y.max()} >= num_classes={c}")
            object.__setattr__(self, "labels", y)
            object.__setattr__(self, "num_classes", c)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency in CSR layout with sorted column indices."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        off = i != j
        rows = np.concatenate([i, j[off]])
        cols = np.concatenate([j, i[off]])
        a = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(self.n, self.n), dtype=np.float64
        )
        a.sum_duplicates()
        a.sort_indices()
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def components(self) -> tuple[int, np.ndarray]:
        return sp.csgraph.connected_components(self.adjacency, directed=False)

    def with_labels(self, labels, num_classes=0) -> "Graph":
        return Graph(self.n, self.edges, self.features, labels, num_classes, dict(self.meta))

    def same_as(self, other: "Graph") -> bool:
        def eq(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            self.n == other.n
            and eq(self.edges, other.edges)
            and eq(self.features, other.features)
            and eq(self.labels, other.labels)
        )


def canonical_edges(pairs, keep_self_loops: bool = False) -> np.ndarray:
    """Orient each pair as (min, max), drop duplicates (and loops unless kept), sort."""
    e = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    e = np.sort(e, axis=1)
    if not keep_self_loops:
        e = e[e[:, 0] != e[:, 1]]
    if e.size == 0:
        return e.reshape(0, 2)
    return np.unique(e, axis=0)


def from_edges(n, pairs, features=None, labels=None, num_classes=0, keep_self_loops=False) -> Graph:
    return Graph(n, canonical_edges(pairs, keep_self_loops), features, labels, num_classes)


# -- file formats -----------------------------------------------------------


def read_edge_list(path) -> tuple[int | None, np.ndarray]:
    path = Path(path)
    declared = None
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if lineno == 1 and len(parts) == 2 and parts[0] == "n":
                    try:
                        declared = int(parts[1])
                    except ValueError:
                        raise ParseError(f"bad node count {parts[1]!r}", path, lineno) from None
                    if declared < 0:
                        raise ParseError("negative node count", path, lineno)
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'u v', got {line!r}", path, lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer node id in {line!r}", path, lineno) from None
            if u < 0 or v < 0:
                raise ParseError(f"negative node id in {line!r}", path, lineno)
            pairs.append((u, v))
    arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return declared, arr


def read_features(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == FEATURE_MAGIC:
        return read_features_binary(path)
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                row = [float(t) for t in line.split()]
            except ValueError:
                raise ParseError(f"non-numeric feature value in {line[:40]!r}", path, lineno) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"row has {len(row)} values, expected {width}", path, lineno)
            rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(len(rows), width or 0)


def read_features_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 20 or data[:4] != FEATURE_MAGIC:
        raise ParseError("not a PFLT feature file", path)
    n, d = struct.unpack_from("<QQ", data, 4)
    body = data[20:]
    if len(body) != 8 * n * d:
        raise ParseError(f"payload is {len(body)} bytes, expected {8 * n * d}", path)
    return np.frombuffer(body, dtype="<f8").reshape(n, d).astype(np.float64)


def write_features_binary(path, x: np.ndarray) -> None:
    x = np.ascontiguousarray(x, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<QQ", x.shape[0], x.shape[1]))
        fh.write(x.tobytes())


def read_labels(path) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise ParseError(f"non-integer label {line!r}", path, lineno) from None
    return np.array(out, dtype=np.int64)


def load_graph(edge_path, feature_path=None, label_path=None, keep_self_loops=False) -> Graph:
    declared, pairs = read_edge_list(edge_path)
    if declared is not None:
        n = declared
        if pairs.size and pairs.max() >= n:
            bad = pairs[(pairs >= n).any(axis=1)][0]
            raise GraphIndexError(f"edge ({bad[0]}, {bad[1]}) references node >= n={n}")
    else:
        n = int(pairs.max()) + 1 if pairs.size else 0
    x = read_features(feature_path) if feature_path is not None else None
    y = read_labels(label_path) if label_path is not None else None
    if declared is None:
        # trailing isolated nodes are only visible through features/labels
        for arr in (x, y):
            if arr is not None:
                n = max(n, arr.shape[0])
    return from_edges(n, pairs, x, y, keep_self_loops=keep_self_loops)


def write_graph(g: Graph, edge_path, feature_path=None, label_path=None, binary_features=False):
    with open(edge_path, "w", encoding="utf-8") as fh:
        fh.write(f"#n {g.n}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")
    if feature_path is not None and g.features is not None:
        if binary_features:
            write_features_binary(feature_path, g.features)
        else:
            with open(feature_path, "w", encoding="utf-8") as fh:
                for row in g.features:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    if label_path is not None and g.labels is not None:
        with open(label_path, "w", encoding="utf-8") as fh:
            fh.write("".join(f"{int(v)}\n" for v in g.labels))


# -- Laplacian ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Laplacian:
    """Normalized Laplacian ``L = I - D^-1/2 A D^-1/2``.

    Isolated nodes get ``D^-1/2 = 0`` so their row of ``L`` is the identity
    row and ``delta = L - I`` is zero there.
    """

    L: sp.csr_matrix
    degrees: np.ndarray
    _delta: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def delta(self) -> sp.csr_matrix:
        return self._delta

    def dense(self) -> np.ndarray:
        return self.L.toarray()

    def null_vector(self) -> np.ndarray:
        """``D^{1/2} 1`` -- spans ker(L) on each non-trivial component."""
        return np.sqrt(self.degrees)


def normalized_laplacian(g: Graph) -> Laplacian:
    a = g.adjacency
    deg = g.degrees
    dinv = np.zeros_like(deg)
    nz = deg > 0
    dinv[nz] = 1.0 / np.sqrt(deg[nz])
    s = sp.diags(dinv) @ a @ sp.diags(dinv)
    s = sp.csr_matrix(s)
    s.sort_indices()
    delta = sp.csr_matrix(-s)
    delta.sort_indices()
    eye = sp.identity(g.n, format="csr")
    lap = sp.csr_matrix(eye - s)
    lap.sort_indices()
    return Laplacian(lap, deg, delta)


def edge_homophily(g: Graph) -> float:
    """Fraction of (non-loop) undirected edges joining same-label endpoints."""
    if g.labels is None:
        raise PreconditionError("edge homophily needs node labels")
    e = g.edges[g.edges[:, 0] != g.edges[:, 1]]
    if e.shape[0] == 0:
        return 0.0
    same = g.labels[e[:, 0]] == g.labels[e[:, 1]]
    return float(same.mean())
