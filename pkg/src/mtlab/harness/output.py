"""CSV, JSON and SVG emission. Plots are drawn from the CSV files alone."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_ID = "mtlab.report/1"

# documented summary layout: key -> required python type(s)
SUMMARY_SCHEMA = {
    "schema": str,
    "name": str,
    "config": dict,
    "environment": dict,
    "checks": list,
    "passed": bool,
    "files": list,
    "data": dict,
}
CHECK_SCHEMA = {
    "name": str,
    "criterion": (int, type(None)),
    "value": (float, int, type(None)),
    "oracle": (float, int, type(None)),
    "tolerance": (float, int, type(None)),
    "passed": bool,
    "detail": str,
}


def estimate_header(ndim: int, ncomp: int) -> list:
    return ([f"bin_center_{d}" for d in range(ndim)] + [f"estimate_{j}" for j in range(ncomp)]
            + [f"stderr_{j}" for j in range(ncomp)] + ["count"]
            + [f"oracle_{j}" for j in range(ncomp)] + ["abs_error", "z_score", "reported"])


def _fmt(v) -> str:
    return repr(float(v))


def write_estimate_csv(path: Path, estimate, oracle) -> Path:
    """One row per bin; abs_error and z_score are taken on the worst component."""
    centers = estimate.centers
    ndim, ncomp = centers.shape[1], estimate.mean.shape[1]
    err = np.abs(estimate.mean - oracle)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (estimate.mean - oracle) / estimate.stderr
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(estimate_header(ndim, ncomp))
        for b in range(len(centers)):
            worst = int(np.nanargmax(np.abs(z[b]))) if np.any(np.isfinite(z[b])) else 0
            w.writerow([_fmt(c) for c in centers[b]] + [_fmt(v) for v in estimate.mean[b]]
                       + [_fmt(v) for v in estimate.stderr[b]] + [int(estimate.count[b])]
                       + [_fmt(v) for v in oracle[b]]
                       + [_fmt(np.nanmax(err[b]) if np.any(np.isfinite(err[b])) else math.nan),
                          _fmt(z[b, worst]), int(estimate.mask[b])])
    return path


def write_table_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for i, h in enumerate(header):
        raw = [r[i] for r in body]
        try:
            cols[h] = np.array([float(v) for v in raw])
        except ValueError:
            # label columns such as the regime name stay as strings
            cols[h] = np.array(raw)
    return header, cols


def _plot_module():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_estimate_csv(csv_path: Path, svg_path: Path | None = None, title: str = "") -> Path:
    """Oracle as lines, reported bins as points with 2-sigma bars, one panel per component."""
    plt = _plot_module()
    header, cols = read_csv(csv_path)
    ncomp = sum(h.startswith("estimate_") for h in header)
    ndim = sum(h.startswith("bin_center_") for h in header)
    # one-dimensional grids plot against position, others against bin index
    x = cols["bin_center_0"] if ndim == 1 else np.arange(len(cols["count"]))
    shown = cols["reported"] > 0
    fig, axes = plt.subplots(ncomp, 1, figsize=(7, 2.6 * ncomp), squeeze=False)
    for j in range(ncomp):
        ax = axes[j, 0]
        ax.plot(x, cols[f"oracle_{j}"], "-", color="0.3", lw=1.2, label="oracle")
        ax.errorbar(x[shown], cols[f"estimate_{j}"][shown], yerr=2 * cols[f"stderr_{j}"][shown],
                    fmt="o", ms=3, capsize=2, label="MC +/- 2 stderr")
        ax.set_ylabel(f"component {j}")
        if j == 0:
            ax.legend(fontsize=8)
            ax.set_title(title or csv_path.stem, fontsize=9)
    axes[-1, 0].set_xlabel("bin center" if ndim == 1 else "bin index")
    fig.tight_layout()
    svg_path = svg_path or csv_path.with_suffix(".svg")
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg_path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def validate_summary(summary: dict) -> list:
    """Problems with a summary against the documented layout; empty when valid."""
    problems = []
    for key, typ in SUMMARY_SCHEMA.items():
        if key not in summary:
            problems.append(f"missing key {key!r}")
        elif not isinstance(summary[key], typ):
            problems.append(f"{key!r} has type {type(summary[key]).__name__}")
    extra = set(summary) - set(SUMMARY_SCHEMA)
    problems += [f"unexpected key {k!r}" for k in sorted(extra)]
    if summary.get("schema") not in (None, SCHEMA_ID):
        problems.append(f"schema id {summary.get('schema')!r}")
    names = []
    for i, chk in enumerate(summary.get("checks", [])):
        if not isinstance(chk, dict):
            problems.append(f"check {i} is not an object")
            continue
        for key, typ in CHECK_SCHEMA.items():
            if key not in chk:
                problems.append(f"check {i} missing {key!r}")
            elif key in ("value", "oracle", "tolerance") and isinstance(chk[key], bool):
                problems.append(f"check {i} {key!r} is boolean")
            elif not isinstance(chk[key], typ):
                problems.append(f"check {i} {key!r} has type {type(chk[key]).__name__}")
        names.append(chk.get("name"))
    if len(names) != len(set(names)):
        problems.append("duplicate check names")
    if isinstance(summary.get("passed"), bool) and summary.get("checks"):
        if summary["passed"] != all(c.get("passed") for c in summary["checks"]):
            problems.append("passed is not the conjunction of the checks")
    return problems
