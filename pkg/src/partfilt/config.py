"""Run configuration: flat ``key = value`` files, JSON replay and flag overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .coarsening import METHODS
from .errors import ArgumentError, ParseError
from .filtering import KINDS
from .model import ORDERS
from .training import TrainConfig


@dataclass
class RunConfig:
    # inputs
    edges: str | None = None
    features: str | None = None
    labels: str | None = None
    partition: str | None = None
    model: str | None = None
    stack: str | None = None
    # common
    seed: int = 0
    seeds: int = 1
    out_dir: str = "out"
    # coarsening / filtering
    r: float = 0.5
    method: str = "local_variation"
    subspace_dim: int = 10
    basis: str = "chebyshev"
    K: int = 10
    jacobi_a: float = 1.0
    jacobi_b: float = 1.0
    # training
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    max_epochs: int = 1000
    patience: int = 200
    hidden: int = 64
    layers: int = 2
    order: str = "medium"
    activation: str = "relu"
    classwise: bool = True
    kmeans_start: int = 20
    kmeans_refresh: int = 10
    grid: bool = False
    split: str = "0.6,0.2,0.2"
    # csbm
    n: int = 400
    d: int = 8
    separation: float = 1.0
    sigma: float = 1.0
    p0: float = 0.05
    q0: float = 0.005
    p1: float = 0.005
    q1: float = 0.05
    P: float = 0.5
    hybrid: bool = False
    # sweep-r
    r_grid: str = "0,0.25,0.5,0.75,max"
    # bench
    bench_n: int = 400
    bench_degrees: str = "4,8,16"
    bench_repeats: int = 3
    # verify
    quick: bool = False
    figures: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ArgumentError(f"method must be one of {METHODS}")
        if self.basis not in KINDS:
            raise ArgumentError(f"basis must be one of {KINDS}")
        if self.order not in ORDERS:
            raise ArgumentError(f"order must be one of {ORDERS}")
        if not 0.0 <= self.r < 1.0:
            raise ArgumentError(f"r must lie in [0, 1), got {self.r}")
        if self.K < 0 or self.subspace_dim < 1 or self.seeds < 1:
            raise ArgumentError("K >= 0, subspace_dim >= 1 and seeds >= 1 required")
        self.split_fractions()

    def split_fractions(self) -> tuple[float, float, float]:
        try:
            parts = tuple(float(x) for x in self.split.split(","))
        except ValueError as exc:
            raise ArgumentError(f"bad split {self.split!r}") from exc
        if len(parts) != 3 or abs(sum(parts) - 1.0) > 1e-9 or min(parts) < 0:
            raise ArgumentError(f"split must be three non-negative fractions summing to 1, got {self.split!r}")
        return parts

    def train_config(self, seed: int | None = None) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        d = {k: v for k, v in asdict(self).items() if k in names}
        if seed is not None:
            d["seed"] = seed
        return TrainConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def coerce(key: str, raw):
    """Convert a raw string (or JSON value) to the declared type of ``key``."""
    if key not in _FIELDS:
        raise ArgumentError(f"unknown config key {key!r}")
    typ = str(_FIELDS[key].type)
    if raw is None:
        return None
    if not isinstance(raw, str):
        return raw
    if typ.startswith("bool"):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ArgumentError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ArgumentError(f"{key}: cannot parse {raw!r} as {typ}") from exc
    return raw


def read_config_file(path) -> dict:
    """Read either a flat ``key = value`` file or a JSON report (its ``config``)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        data = data.get("config", data)
        unknown = set(data) - set(_FIELDS)
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        return dict(data)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", path, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ParseError(f"unknown config key {key!r}", path, lineno)
        out[key] = coerce(key, value)
    return out


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then file values, then explicit flag overrides."""
    merged = {}
    for src in (file_values or {}, overrides or {}):
        for k, v in src.items():
            if v is not None:
                merged[k] = coerce(k, v)
    return RunConfig(**merged)
