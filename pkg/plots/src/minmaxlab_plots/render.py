"""Figure rendering: log-scale convergence curves and complex-plane spectra.

Rendering is a pure function of its inputs: the same CSVs and spec produce
the same plotted data, and inputs are never written to. Distances are floored
at 1e-16 so exact zeros survive the log axis; non-finite values are dropped
(frozen diverged runs report their cutoff value, which plots fine).
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .figspec import (
    EmptySeriesError,
    FigureSpec,
    MissingFileError,
    SchemaError,
    select_series,
)

LOG_FLOOR = 1e-16


def _gather(spec: FigureSpec):
    """Group (passes, distance) arrays by label, preserving spec order."""
    grouped: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}
    order: list[str] = []
    for entry in spec.series:
        passes, dist = select_series(entry.csv, entry.filter)
        keep = np.isfinite(dist) & np.isfinite(passes)
        passes, dist = passes[keep], np.maximum(dist[keep], LOG_FLOOR)
        if passes.size == 0:
            raise EmptySeriesError(
                f"{entry.csv}: series {entry.filter!r} has no finite rows"
            )
        if entry.label not in grouped:
            order.append(entry.label)
        grouped.setdefault(entry.label, []).append((passes, dist))
    return order, grouped


def render_curves(spec: FigureSpec, output=None):
    """Draw distance-vs-passes curves: per label the median over its runs is
    thick, the individual runs translucent. Returns the plotted data."""
    spec.validate()
    order, grouped = _gather(spec)
    out_path = Path(output or spec.output)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    cmap = plt.get_cmap("tab10")
    summary = {}
    for i, label in enumerate(order):
        runs = grouped[label]
        color = cmap(i % 10)
        for passes, dist in runs:
            ax.plot(passes, dist, color=color, alpha=0.25, linewidth=0.8)
        n = min(len(p) for p, _ in runs)
        med_x = runs[0][0][:n]
        med_y = np.median(np.stack([d[:n] for _, d in runs]), axis=0)
        ax.plot(med_x, med_y, color=color, linewidth=2.0, label=label)
        summary[label] = {"passes": med_x, "median": med_y,
                          "runs": len(runs), "final": float(med_y[-1])}
    ax.set_yscale("log")
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.2)
    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format=spec.image_format, dpi=130)
    plt.close(fig)
    return summary


def load_spectrum_report(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"spectrum report not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    for key in ("eigenvalues", "spectral_radius", "verdict"):
        if key not in data:
            raise SchemaError(f"{path}: spectrum report lacks field {key!r}")
    eigs = np.asarray(data["eigenvalues"], dtype=float)
    if eigs.ndim != 2 or eigs.shape[1] != 2:
        raise SchemaError(f"{path}: eigenvalues must be [re, im] pairs")
    return data


def render_spectrum(report_path, output, title=None):
    """Scatter the eigenvalues in the complex plane with the unit circle
    overlaid. Returns the plotted points and radius."""
    data = load_spectrum_report(report_path)
    eigs = np.asarray(data["eigenvalues"], dtype=float)

    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    angle = np.linspace(0, 2 * np.pi, 512)
    ax.plot(np.cos(angle), np.sin(angle), color="gray", linewidth=1.0,
            label="unit circle")
    ax.scatter(eigs[:, 0], eigs[:, 1], color="crimson", zorder=3,
               label=f"eigenvalues ({data['verdict']})")
    ax.axhline(0.0, color="black", linewidth=0.4)
    ax.axvline(0.0, color="black", linewidth=0.4)
    lim = max(1.15, 1.15 * np.abs(eigs).max())
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.set_aspect("equal")
    ax.set_xlabel("real")
    ax.set_ylabel("imaginary")
    ax.set_title(title or f"spectral radius {data['spectral_radius']:.6g}")
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    out_path = Path(output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return {
        "points": eigs,
        "spectral_radius": float(data["spectral_radius"]),
        "verdict": data["verdict"],
    }
