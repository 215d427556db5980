"""Clustering on compressed representations and the evaluation metrics.

The weighted k-means here is a plain Lloyd loop with weight-scaled means
and weighted SSE, seeded k-means++ initialization, and best-of-inits
restarts, so clustering m weighted points matches clustering the
weight-expanded multiset. AMI and silhouette wrap scikit-learn with the
degenerate cases pinned down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import adjusted_mutual_info_score, silhouette_score

from .codec import Archive


@dataclass
class ClusteringResult:
    labels: np.ndarray
    centers: np.ndarray
    sse: float
    iterations: int
    seed: int


@dataclass
class MetricsReport:
    """Everything one analytics run reports; None marks undefined values."""

    mode: str
    cr: float
    adr: float
    ar: float | None
    ami: float
    silhouette: float | None
    configuration_time: float
    clustering_time: float
    full_clustering_time: float
    k: int
    seed: int
    extras: dict = field(default_factory=dict)


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x||^2 - 2 x.c + ||c||^2, clipped at zero against rounding
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers**2, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def transfer_labels(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-center assignment (first index wins ties)."""
    return np.argmin(_squared_distances(points, centers), axis=1)


def sse_on(points: np.ndarray, centers: np.ndarray, weights: np.ndarray | None = None) -> float:
    """(Weighted) sum of squared distances to the nearest center."""
    mind = np.min(_squared_distances(points, centers), axis=1)
    if weights is None:
        return float(mind.sum())
    return float((weights * mind).sum())


def _kmeanspp(points: np.ndarray, weights: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = len(points)
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    prob = weights / weights.sum()
    first = rng.choice(m, p=prob)
    centers[0] = points[first]
    closest = _squared_distances(points, centers[:1])[:, 0]
    for c in range(1, k):
        mass = weights * closest
        total = mass.sum()
        if total <= 0:
            idx = rng.choice(m, p=prob)
        else:
            idx = rng.choice(m, p=mass / total)
        centers[c] = points[idx]
        closest = np.minimum(closest, _squared_distances(points, centers[c : c + 1])[:, 0])
    return centers


def lloyd(
    points: np.ndarray,
    weights: np.ndarray,
    centers: np.ndarray,
    max_iter: int = 300,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Weighted Lloyd iterations from explicit starting centers.

    Empty clusters are re-seeded from the point with the largest weighted
    squared distance to its assigned center (lowest index on ties).
    """
    k = len(centers)
    centers = centers.astype(np.float64).copy()
    labels = np.full(len(points), -1, dtype=np.int64)
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = _squared_distances(points, centers)
        new_labels = np.argmin(d2, axis=1)
        cluster_mass = np.bincount(new_labels, weights=weights, minlength=k)
        empties = np.flatnonzero(cluster_mass == 0)
        if len(empties):
            contributions = weights * d2[np.arange(len(points)), new_labels]
            for c in empties:
                far = int(np.argmax(contributions))
                centers[c] = points[far]
                contributions[far] = -1.0
            d2 = _squared_distances(points, centers)
            new_labels = np.argmin(d2, axis=1)
            cluster_mass = np.bincount(new_labels, weights=weights, minlength=k)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            mask = labels == c
            if cluster_mass[c] > 0:
                centers[c] = np.average(points[mask], axis=0, weights=weights[mask])
    sse = sse_on(points, centers, weights)
    return labels, centers, sse, iterations


def weighted_kmeans(
    points: np.ndarray,
    weights: np.ndarray | None,
    k: int,
    inits: int = 10,
    seed: int = 0,
    max_iter: int = 300,
) -> ClusteringResult:
    """Best of `inits` seeded k-means++ starts of weighted Lloyd."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be 2-D")
    m = len(points)
    if weights is None:
        weights = np.ones(m, dtype=np.float64)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (m,):
            raise ValueError("weights must have one entry per point")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    if inits < 1:
        raise ValueError("inits must be >= 1")

    rng = np.random.default_rng(seed)
    best: ClusteringResult | None = None
    for _ in range(inits):
        init_seed = int(rng.integers(0, 2**63 - 1))
        init_rng = np.random.default_rng(init_seed)
        centers0 = _kmeanspp(points, weights, k, init_rng)
        labels, centers, sse, iters = lloyd(points, weights, centers0, max_iter=max_iter)
        if best is None or sse < best.sse:
            best = ClusteringResult(labels, centers, sse, iters, seed)
    return best


def approximation_ratio(sse_compressed: float, sse_original: float) -> float | None:
    """SSE ratio of the compressed-side clustering over the full-data one.

    Both SSEs must be evaluated on the same (full) data; undefined (None)
    when the reference SSE is zero.
    """
    if sse_original == 0:
        return None
    return sse_compressed / sse_original


def adjusted_mutual_information(labels_a, labels_b) -> float:
    """Standard AMI with arithmetic-mean normalization.

    Defined as 0 when either labeling is a single cluster.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("label vectors must have equal length")
    if len(np.unique(a)) < 2 or len(np.unique(b)) < 2:
        return 0.0
    return float(adjusted_mutual_info_score(a, b))


def silhouette(
    points: np.ndarray,
    labels: np.ndarray,
    sample_size: int = 10_000,
    seed: int = 0,
) -> float | None:
    """Mean silhouette coefficient on a seeded sample; None when undefined."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        return None
    size = min(sample_size, len(points))
    rng = np.random.default_rng(seed)
    if size < len(points):
        idx = rng.choice(len(points), size=size, replace=False)
        points = points[idx]
        labels = labels[idx]
        if len(np.unique(labels)) < 2:
            return None
    return float(silhouette_score(points, labels))


def compute_ratios(archive: Archive, original_size_bytes: int, analytics_mode: str = "condensed") -> dict:
    """Compression ratio and analytics-data ratio for one archive.

    CR is the full archive over the original bytes. ADR counts the bytes
    an analytics pass touches: the condensed/weight sections (condensed
    mode) or the base table plus ids (centroid mode, where member counts
    come from the id section), params and header included in both.
    """
    if original_size_bytes <= 0:
        raise ValueError("original_size_bytes must be positive")
    sizes = archive.section_sizes()
    total = sum(sizes.values())
    shared = sizes["header"] + sizes["params"]
    if analytics_mode == "condensed":
        touched = shared + sizes["weights"] + sizes["condensed"]
    elif analytics_mode == "centroid":
        touched = shared + sizes["base_table"] + sizes["ids"]
    else:
        raise ValueError(f"unknown analytics mode {analytics_mode!r}")
    return {"cr": total / original_size_bytes, "adr": touched / original_size_bytes}


def original_size_bytes(archive: Archive) -> int:
    """Uncompressed size of the stored table at its recorded precisions."""
    return archive.n * sum(p.original_precision // 8 for p in archive.params)
