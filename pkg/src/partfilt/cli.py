"""``partfilt`` command-line driver.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print one
line ``error: <kind>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import report
from .coarsening import coarsen, coarsening_operator, coarsening_subspace, read_partition, rsa_constant, write_partition
from .config import RunConfig, build_config, read_config_file
from .errors import ArgumentError, PartfiltError
from .filtering import PolyBasis, propagate_basis, read_stack, write_stack
from .graph import Graph, load_graph, normalized_laplacian, write_graph
from .spectral import N_MAX
from .synthetic import CSBMParams, csbm_generate, hybrid_experiment, separated_means, write_regimes
from .training import evaluate, grid_search, load_model, random_split, save_model, train

GROUPS = {
    "graph": ("edges", "features", "labels"),
    "coarsen": ("r", "method", "subspace_dim"),
    "basis": ("basis", "K", "jacobi_a", "jacobi_b"),
    "train": (
        "lr", "weight_decay", "dropout", "max_epochs", "patience", "hidden", "layers", "order",
        "activation", "classwise", "kmeans_start", "kmeans_refresh", "grid", "split", "seeds",
    ),
    "csbm": ("n", "d", "separation", "sigma", "p0", "q0", "p1", "q1", "P"),
}

COMMANDS = {
    "coarsen": ("graph", "coarsen"),
    "propagate": ("graph", "basis"),
    "train": ("graph", "coarsen", "basis", "train"),
    "eval": ("graph",),
    "csbm": ("csbm", "coarsen", "basis", "train"),
    "sweep-r": ("graph", "csbm", "coarsen", "basis", "train"),
    "verify": (),
    "bench": ("basis",),
}
EXTRA = {
    "train": ("partition", "stack"),
    "eval": ("model", "split"),
    "csbm": ("hybrid",),
    "sweep-r": ("r_grid",),
    "verify": ("quick",),
    "bench": ("bench_n", "bench_degrees", "bench_repeats"),
}
_BOOL = {f.name for f in fields(RunConfig) if str(f.type) == "bool"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error: usage: {message}\n")
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="partfilt", description="Coarsening-guided partition-wise graph filtering.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd, groups in COMMANDS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--seed", default=None)
        p.add_argument("--out-dir", dest="out_dir", default=None)
        p.add_argument("--config", default=None, help="key = value file or a JSON report to replay")
        p.add_argument("--no-figures", dest="figures", action="store_const", const="false", default=None)
        names = [n for g in groups for n in GROUPS[g]] + list(EXTRA.get(cmd, ()))
        for name in dict.fromkeys(names):
            flag = "--" + name.replace("_", "-")
            if name in _BOOL:
                p.add_argument(flag, dest=name, nargs="?", const="true", default=None)
            else:
                p.add_argument(flag, dest=name, default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    return build_config(file_values, overrides)


def _load(cfg: RunConfig, need_labels: bool = False) -> Graph:
    if not cfg.edges:
        raise ArgumentError("--edges is required")
    if need_labels and not cfg.labels:
        raise ArgumentError("--labels is required")
    return load_graph(cfg.edges, cfg.features, cfg.labels)


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seeds(cfg: RunConfig) -> list[int]:
    return list(range(cfg.seed, cfg.seed + cfg.seeds))


def cmd_coarsen(cfg: RunConfig) -> int:
    g = _load(cfg)
    lap = normalized_laplacian(g)
    part = coarsen(g, cfg.r, cfg.method, cfg.subspace_dim, cfg.seed, lap=lap)
    out = _out(cfg)
    write_partition(out / "partition.txt", part)
    eps = float("nan")
    if g.n <= N_MAX:
        _, V = coarsening_subspace(lap, cfg.subspace_dim)
        eps = rsa_constant(lap, coarsening_operator(part), V)
    row = {"n": g.n, "n_prime": part.n_prime, "r": cfg.r, "ratio": part.ratio, "method": cfg.method,
           "subspace_dim": cfg.subspace_dim, "rsa_eps": eps, "sha256": part.digest()}
    report.emit_report([row], out / "coarsen", cfg.to_dict(), [cfg.seed])
    print(f"n={g.n} n'={part.n_prime} eps={eps:.6g} -> {out / 'partition.txt'}")
    return 0


def cmd_propagate(cfg: RunConfig) -> int:
    g = _load(cfg)
    if g.features is None:
        raise ArgumentError("--features is required")
    basis = PolyBasis(cfg.basis, cfg.K, cfg.jacobi_a, cfg.jacobi_b)
    stack = propagate_basis(normalized_laplacian(g), g.features, basis)
    out = _out(cfg)
    write_stack(out / "stack.pfst", stack)
    row = {"basis": basis.tag, "K": cfg.K, "n": stack.n, "d": stack.d, "max_abs": float(np.abs(stack.slices).max())}
    report.emit_report([row], out / "propagate", cfg.to_dict(), [cfg.seed])
    print(f"stack K={cfg.K} n={stack.n} d={stack.d} -> {out / 'stack.pfst'}")
    return 0


TRAIN_COLUMNS = ("seed", "n_prime", "best_epoch", "train_acc", "val_acc", "test_acc")


def _train_rows(g: Graph, cfg: RunConfig, out: Path, partition=None, stack=None, tag="") -> list[dict]:
    lap = normalized_laplacian(g)
    rows = []
    for s in _seeds(cfg):
        tcfg = cfg.train_config(seed=s)
        split = random_split(g.n, cfg.split_fractions(), seed=s)
        part = partition or coarsen(g, tcfg.r, tcfg.method, tcfg.subspace_dim, s, lap=lap)
        if cfg.grid:
            tcfg.check_grid()
            model, log, _ = grid_search(g, tcfg, split, partition=part, lap=lap)
        else:
            model, log = train(g, tcfg, split, partition=part, lap=lap, stack=stack)
        acc = evaluate(model, g, split)
        rows.append({"seed": s, "n_prime": part.n_prime, "best_epoch": model.best_epoch,
                     "train_acc": acc["train"], "val_acc": acc["val"], "test_acc": acc["test"]})
        if out is not None:
            save_model(out / f"model{tag}_seed{s}.pfmd", model)
            log.to_csv(out / f"metrics{tag}_seed{s}.csv")
            if cfg.figures:
                report.plot_training_curves(log, out / f"training{tag}_seed{s}.png")
    return rows


def cmd_train(cfg: RunConfig) -> int:
    g = _load(cfg, need_labels=True)
    part = read_partition(cfg.partition) if cfg.partition else None
    stack = read_stack(cfg.stack) if cfg.stack else None
    out = _out(cfg)
    rows = _train_rows(g, cfg, out, part, stack)
    report.emit_report(rows, out / "train", cfg.to_dict(), _seeds(cfg), TRAIN_COLUMNS)
    for r in rows:
        print(f"seed {r['seed']}: test_acc={r['test_acc']:.4f} (best epoch {r['best_epoch']})")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    if not cfg.model:
        raise ArgumentError("--model is required")
    g = _load(cfg, need_labels=True)
    model = load_model(cfg.model)
    if model.partition.n != g.n:
        raise ArgumentError(f"model was trained on {model.partition.n} nodes, graph has {g.n}")
    split = random_split(g.n, cfg.split_fractions(), seed=cfg.seed)
    acc = evaluate(model, g, split)
    rows = [{"split": k, "accuracy": v} for k, v in acc.items()]
    report.emit_report(rows, _out(cfg) / "eval", cfg.to_dict(), [cfg.seed], ("split", "accuracy"))
    print(" ".join(f"{k}={v:.4f}" for k, v in acc.items()))
    return 0


def _csbm_params(cfg: RunConfig, seed: int) -> CSBMParams:
    mu, nu = separated_means(cfg.d, cfg.separation)
    return CSBMParams(cfg.n, mu, nu, cfg.sigma, cfg.p0, cfg.q0, cfg.p1, cfg.q1, cfg.P, seed)


def cmd_csbm(cfg: RunConfig) -> int:
    out = _out(cfg)
    sample = csbm_generate(_csbm_params(cfg, cfg.seed))
    write_graph(sample.graph, out / "edges.txt", out / "features.txt", out / "labels.txt")
    write_regimes(out / "regimes.txt", sample.regime)
    print(f"csbm n={cfg.n} edges={sample.graph.num_edges} -> {out}")
    if cfg.hybrid:
        rows = []
        for s in _seeds(cfg):
            rows.extend(hybrid_experiment(_csbm_params(cfg, s), cfg.train_config(seed=s)).rows())
        cols = ("seed", "paradigm", "train_acc", "val_acc", "test_acc", "filter_params", "total_params")
        report.emit_report(rows, out / "hybrid", cfg.to_dict(), _seeds(cfg), cols)
        for r in rows:
            print(f"seed {r['seed']} {r['paradigm']:>15}: test_acc={r['test_acc']:.4f} params={r['filter_params']}")
    return 0


def parse_r_grid(spec: str, n: int) -> list[float]:
    out = []
    for tok in spec.split(","):
        tok = tok.strip()
        out.append((n - 1) / n if tok == "max" else float(tok))
    return out


SWEEP_COLUMNS = ("r", "seed", "n_prime", "train_acc", "val_acc", "test_acc")


def cmd_sweep_r(cfg: RunConfig) -> int:
    if cfg.edges:
        g = _load(cfg, need_labels=True)
    else:
        g = csbm_generate(_csbm_params(cfg, cfg.seed)).graph
    try:
        grid = parse_r_grid(cfg.r_grid, g.n)
    except ValueError as exc:
        raise ArgumentError(f"bad r grid {cfg.r_grid!r}") from exc
    lap = normalized_laplacian(g)
    rows = []
    for r in grid:
        for s in _seeds(cfg):
            tcfg = cfg.train_config(seed=s)
            part = coarsen(g, r, tcfg.method, tcfg.subspace_dim, s, lap=lap)
            split = random_split(g.n, cfg.split_fractions(), seed=s)
            model, _ = train(g, tcfg, split, partition=part, lap=lap)
            acc = evaluate(model, g, split)
            rows.append({"r": r, "seed": s, "n_prime": part.n_prime,
                         "train_acc": acc["train"], "val_acc": acc["val"], "test_acc": acc["test"]})
    out = _out(cfg)
    report.emit_report(rows, out / "sweep_r", cfg.to_dict(), _seeds(cfg), SWEEP_COLUMNS)
    if cfg.figures and rows:
        report.plot_sweep_r(rows, out / "sweep_r.png")
    for r in rows:
        print(f"r={r['r']:.4f} seed={r['seed']} n'={r['n_prime']} test_acc={r['test_acc']:.4f}")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    from .verification import run_all

    results = run_all(quick=cfg.quick)
    for res in results:
        print(res.line())
    rows = [res.row() for res in results]
    report.emit_report(rows, _out(cfg) / "verify", cfg.to_dict(), [cfg.seed],
                       ("check", "status", "value", "threshold", "seconds"))
    return 1 if any(res.passed is False for res in results) else 0


def cmd_bench(cfg: RunConfig) -> int:
    from .bench import bench_edges, bench_nodes, summarize

    try:
        degrees = [int(x) for x in cfg.bench_degrees.split(",")]
    except ValueError as exc:
        raise ArgumentError(f"bad degree list {cfg.bench_degrees!r}") from exc
    rows = bench_edges(cfg.bench_n, degrees, K=cfg.K, r=cfg.r, repeats=cfg.bench_repeats, seed=cfg.seed)
    for row in rows:
        row["sweep"] = "edges"
    nrows = bench_nodes((cfg.bench_n, 2 * cfg.bench_n, 4 * cfg.bench_n), degrees[0], K=cfg.K, r=cfg.r,
                        repeats=cfg.bench_repeats, seed=cfg.seed)
    for row in nrows:
        row["sweep"] = "nodes"
    summary = summarize(rows)
    out = _out(cfg)
    report.emit_report(rows + nrows, out / "bench", cfg.to_dict(), [cfg.seed],
                       ("sweep", "filter", "n", "edges", "seconds"), extra={"edge_sweep": summary})
    if cfg.figures:
        report.plot_bench(rows, out / "bench.png")
    for name, s in summary.items():
        print(f"{name}: exponent={s['exponent']:.3f} rate={s['rate']:.3g} s/edge")
    return 0


HANDLERS = {
    "coarsen": cmd_coarsen,
    "propagate": cmd_propagate,
    "train": cmd_train,
    "eval": cmd_eval,
    "csbm": cmd_csbm,
    "sweep-r": cmd_sweep_r,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return HANDLERS[args.command](cfg)
    except ArgumentError as exc:
        sys.stderr.write(f"error: {exc.kind}: {exc}\n")
        return 2
    except PartfiltError as exc:
        sys.stderr.write(f"error: {exc.kind}: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: io: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
