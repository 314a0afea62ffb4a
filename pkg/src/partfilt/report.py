"""CSV/JSON report twins and matplotlib figures."""

from __future__ import annotations

import csv
import json
import subprocess
from pathlib import Path

import numpy as np

from . import __version__


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        )
        return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        return __version__


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_csv(path, rows: list[dict], columns=None) -> None:
    columns = list(columns) if columns is not None else (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k)) for k in columns})


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def emit_report(rows: list[dict], path, config: dict | None = None, seeds=(), columns=None, extra=None) -> tuple[Path, Path]:
    """Write ``<path>.csv`` and its ``<path>.json`` twin.

    The JSON carries the config echo, the version string and the seeds so a
    run can be replayed with ``--config <path>.json``.
    """
    path = Path(path)
    if path.suffix in (".csv", ".json"):
        path = path.with_suffix("")
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
    write_csv(csv_path, rows, columns)
    doc = {
        "version": version_string(),
        "config": _jsonable(config or {}),
        "seeds": _jsonable(list(seeds)),
        "columns": list(columns) if columns is not None else (list(rows[0]) if rows else []),
        "rows": _jsonable(rows),
    }
    if extra:
        doc["extra"] = _jsonable(extra)
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path


# -- figures ------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_training_curves(log, path) -> Path:
    plt = _pyplot()
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ep = log.column("epoch")
    a1.plot(ep, log.column("train_loss"))
    a1.set_xlabel("epoch")
    a1.set_ylabel("train loss")
    a2.plot(ep, log.column("train_acc"), label="train")
    a2.plot(ep, log.column("val_acc"), label="val")
    a2.set_xlabel("epoch")
    a2.set_ylabel("accuracy")
    a2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_sweep_r(rows: list[dict], path, metric: str = "test_acc") -> Path:
    plt = _pyplot()
    rs = sorted({float(r["r"]) for r in rows})
    mean = [np.mean([row[metric] for row in rows if float(row["r"]) == r]) for r in rs]
    std = [np.std([row[metric] for row in rows if float(row["r"]) == r]) for r in rs]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(rs, mean, yerr=std, marker="o", capsize=3)
    ax.set_xlabel("coarsening ratio r")
    ax.set_ylabel(metric.replace("_", " "))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_bench(rows: list[dict], path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in sorted({r["filter"] for r in rows}):
        sub = sorted((r for r in rows if r["filter"] == name), key=lambda r: r["edges"])
        ax.loglog([r["edges"] for r in sub], [r["seconds"] for r in sub], marker="o", label=name)
    ax.set_xlabel("edges")
    ax.set_ylabel("seconds")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
