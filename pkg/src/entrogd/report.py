"""Report emission: delimited tables and the figures rendered next to them."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def write_rows_csv(path, rows: Sequence[dict]) -> None:
    """One dict per row; the union of keys becomes the header."""
    path = Path(path)
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def fig_cr_boxplot(cr_by_method: dict[str, list[float]], path) -> None:
    """Box plot of compression ratios per method across datasets."""
    methods = [m for m, vals in cr_by_method.items() if vals]
    data = [cr_by_method[m] for m in methods]
    fig, ax = plt.subplots(figsize=(1.2 * max(4, len(methods)), 4))
    ax.boxplot(data, tick_labels=methods)
    ax.set_ylabel("compression ratio (lower is better)")
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_scaling(
    dims: Sequence[int],
    entropy_times: Sequence[float],
    greedy_times: Sequence[float],
    slopes: dict[str, float],
    path,
) -> None:
    """Log-log configuration time vs dimensionality for both strategies."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(dims, entropy_times, "o-", label=f"entropy (slope {slopes['entropy']:.2f})")
    ax.loglog(dims, greedy_times, "s-", label=f"greedy (slope {slopes['greedy']:.2f})")
    ax.set_xlabel("columns d")
    ax.set_ylabel("configuration time [s]")
    ax.set_xticks(list(dims), [str(x) for x in dims])
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_clusters(
    points: np.ndarray,
    labels: np.ndarray,
    centers: np.ndarray,
    path,
    max_points: int = 5000,
    seed: int = 0,
) -> None:
    """First-two-dimensions scatter of labeled points with centers overlaid."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[1] == 1:
        points = np.column_stack([points[:, 0], np.zeros(len(points))])
        centers = np.column_stack([centers[:, 0], np.zeros(len(centers))])
    if len(points) > max_points:
        idx = np.random.default_rng(seed).choice(len(points), size=max_points, replace=False)
        points = points[idx]
        labels = np.asarray(labels)[idx]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.scatter(points[:, 0], points[:, 1], c=labels, s=4, cmap="tab10", alpha=0.5, lw=0)
    ax.scatter(centers[:, 0], centers[:, 1], c="black", marker="x", s=80, lw=2)
    ax.set_xlabel("dim 0")
    ax.set_ylabel("dim 1")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
