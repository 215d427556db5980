"""Seeded synthetic tables for benchmarks and tests."""

from __future__ import annotations

import numpy as np


def gaussian_mixture(
    n: int,
    d: int,
    k: int,
    seed: int = 0,
    separation: float = 12.0,
    scale: float = 1.0,
    decimals: int = 3,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Well-separated k-component Gaussian blobs, rounded to fixed decimals.

    Returns (columns, component labels). Rounding keeps the data
    fixed-point codable, like sensor readings.
    """
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-separation, separation, size=(k, d))
    labels = rng.integers(0, k, size=n)
    points = centers[labels] + rng.normal(0.0, scale, size=(n, d))
    points = np.round(points, decimals)
    return [np.ascontiguousarray(points[:, j]) for j in range(d)], labels


def sensor_table(
    n: int,
    d: int,
    seed: int = 0,
    k: int = 16,
    flip: float = 0.01,
) -> list[np.ndarray]:
    """Cluster-structured 16-bit integer columns for the scaling bench.

    Rows repeat one of k joint readings with a rare one-unit flip, so the
    base count stays near k and both selection strategies walk the whole
    bit budget: work grows with the column count, not the data content.
    """
    rng = np.random.default_rng(seed)
    centers = rng.integers(0, 2**16, size=(k, d))
    cluster = rng.integers(0, k, size=n)
    cols = []
    for j in range(d):
        v = centers[cluster, j] + (rng.random(n) < flip)
        cols.append(np.clip(v, 0, 2**16 - 1).astype(np.int64))
    return cols
