"""Result persistence: CSV tables, JSON manifests and SVG line plots."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "rtboussinesq"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    x = float(v)
    return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def write_csv(path, columns: Sequence[str], rows) -> Path:
    """Write rows (sequences aligned with ``columns``) with full float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_records(path, records: Sequence[Mapping], columns: Sequence[str], extra=None) -> Path:
    extra = extra or {}
    cols = list(extra) + list(columns)
    rows = [[extra[k] for k in extra] + [r.get(c) for c in columns] for r in records]
    return write_csv(path, cols, rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_manifest(path, manifest: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True))
    return path


def _save_svg(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def line_plot_svg(path, x, series: Mapping[str, np.ndarray], xlabel: str, ylabel: str,
                  logy: bool = False, annotation: str | None = None) -> Path:
    """Self-contained SVG line plot of one or more series against x."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        y = np.asarray(y, dtype=float)
        ax.plot(x, y, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    if annotation:
        ax.text(0.02, 0.95, annotation, transform=ax.transAxes, va="top")
    fig.tight_layout()
    _save_svg(fig, path)
    return path


def emit_plot_data(kind: str, data: Mapping, path) -> list:
    """CSV (always) plus an SVG for curves and time series.

    ``data`` holds ``columns`` and ``rows``; curves and time series also
    name ``x`` and ``y`` columns for the plot, and time series may give
    ``slope`` for a fitted exponential rate.
    """
    if kind not in ("curve", "timeseries", "field"):
        raise ValueError("kind must be curve, timeseries or field")
    path = Path(path)
    if path.suffix in (".csv", ".svg"):
        path = path.with_suffix("")
    # append rather than with_suffix: stems such as "snapshot_t0.1" contain dots
    out = [write_csv(path.parent / (path.name + ".csv"), data["columns"], data["rows"])]
    if kind == "field":
        return out
    cols = list(data["columns"])
    arr = np.array([[float("nan") if v is None else float(v) for v in r] for r in data["rows"]])
    xi = cols.index(data["x"])
    series = {name: arr[:, cols.index(name)] for name in data["y"]}
    annotation = None
    if kind == "timeseries" and data.get("slope") is not None:
        annotation = f"fitted rate {data['slope']:.5g}"
    out.append(line_plot_svg(path.parent / (path.name + ".svg"), arr[:, xi], series, data["x"],
                             data.get("ylabel", ", ".join(data["y"])), logy=kind == "timeseries",
                             annotation=annotation))
    return out
