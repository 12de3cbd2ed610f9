"""K-means clustering of 100-bin trajectories with diagnostics and shape
aggregation.

Lloyd's algorithm with k-means++ seeding, deterministic given a seed:
restart r uses seed+r, best inertia wins with ties broken by lowest restart
index, and final cluster indices are relabeled in descending order of
centroid mean (index 0 = most positive shape).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.metrics import silhouette_score

from .corpus import Z_99

MAX_LLOYD_ITER = 300


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray  # k x n_bins
    assignments: np.ndarray  # per-record cluster index
    inertia: float
    seed: int


@dataclass(frozen=True)
class ClusterDiagnostics:
    wss_by_k: dict
    silhouette_by_k: dict
    recommended_k: Optional[int]  # None when silhouette undefined (k_max < 2)


@dataclass(frozen=True)
class AggregateShape:
    cluster_id: int
    stat: str  # "mean" or "median"
    center: np.ndarray
    ci99_low: Optional[np.ndarray]  # None for median shapes
    ci99_high: Optional[np.ndarray]
    sd_low: np.ndarray  # center - 1 population SD
    sd_high: np.ndarray
    n: int
    share: float


def _as_matrix(X) -> np.ndarray:
    if len(X) == 0:
        raise ClusteringError("no trajectories to cluster")
    rows = [t.bins if hasattr(t, "bins") else t for t in X]
    return np.asarray(rows, dtype=float)


def _kmeans_pp_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    centroids = np.empty((k, data.shape[1]))
    centroids[0] = data[rng.integers(n)]
    dist_sq = ((data - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = dist_sq.sum()
        if total <= 0:
            # all remaining points coincide with chosen centroids
            centroids[i] = data[rng.integers(n)]
            continue
        idx = rng.choice(n, p=dist_sq / total)
        centroids[i] = data[idx]
        dist_sq = np.minimum(dist_sq, ((data - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _lloyd(data: np.ndarray, k: int, rng: np.random.Generator,
           trace: Optional[list] = None):
    centroids = _kmeans_pp_init(data, k, rng)
    assignments = None
    for _ in range(MAX_LLOYD_ITER):
        d2 = ((data[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignments = d2.argmin(axis=1)
        if trace is not None:
            trace.append(float(d2[np.arange(len(data)), new_assignments].sum()))
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for j in range(k):
            members = data[assignments == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
            else:
                # reseed an emptied cluster to the point farthest from its
                # current centroid, so k never silently shrinks
                own = ((data - centroids[assignments]) ** 2).sum(axis=1)
                centroids[j] = data[own.argmax()]
    d2 = ((data[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignments = d2.argmin(axis=1)
    inertia = d2[np.arange(len(data)), assignments].sum()
    return centroids, assignments, float(inertia)


def kmeans(X, k: int, seed: int = 0, restarts: int = 25) -> ClusterModel:
    """Best-of-restarts k-means over trajectories in bin space."""
    data = _as_matrix(X)
    if not (1 <= k <= len(data)):
        raise ClusteringError(f"k must be in [1, {len(data)}], got {k}")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        centroids, assignments, inertia = _lloyd(data, k, rng)
        if best is None or inertia < best[2]:
            best = (centroids, assignments, inertia)
    centroids, assignments, inertia = best

    # relabel so index 0 is the most positive centroid
    order = np.argsort(-centroids.mean(axis=1), kind="stable")
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(k)
    return ClusterModel(
        k=k,
        centroids=centroids[order],
        assignments=relabel[assignments],
        inertia=inertia,
        seed=seed,
    )


def select_k(X, k_min: int = 1, k_max: int = 10, seed: int = 0,
             restarts: int = 25) -> ClusterDiagnostics:
    """WSS curve for the elbow plot plus mean silhouette; recommends the
    silhouette argmax (ties to the smaller k)."""
    data = _as_matrix(X)
    if len(data) <= k_max:
        raise ClusteringError(
            f"need more than k_max={k_max} trajectories, got {len(data)}"
        )
    if not (1 <= k_min <= k_max):
        raise ClusteringError(f"bad k range [{k_min}, {k_max}]")
    wss, sil = {}, {}
    for k in range(k_min, k_max + 1):
        model = kmeans(data, k, seed=seed, restarts=restarts)
        wss[k] = model.inertia
        if k >= 2 and len(set(model.assignments.tolist())) >= 2:
            sil[k] = float(silhouette_score(data, model.assignments))
    recommended = max(sorted(sil), key=lambda k: sil[k]) if sil else None
    return ClusterDiagnostics(wss_by_k=wss, silhouette_by_k=sil, recommended_k=recommended)


def aggregate_shapes(X, assignments, stat: str = "mean") -> list:
    """Per-cluster aggregate curves with uncertainty bands.

    Mean shapes carry a 99% CI (sample SD) and a +/- 1 population-SD band;
    median shapes carry only the SD band.
    """
    if stat not in ("mean", "median"):
        raise ClusteringError(f"stat must be mean or median, got {stat!r}")
    data = _as_matrix(X)
    assignments = np.asarray(assignments)
    if len(assignments) != len(data):
        raise ClusteringError("assignments length does not match trajectories")
    shapes = []
    total = len(data)
    for cid in sorted(set(assignments.tolist())):
        members = data[assignments == cid]
        n = len(members)
        if n == 0:
            raise ClusteringError(f"cluster {cid} is empty")
        center = np.mean(members, axis=0) if stat == "mean" else np.median(members, axis=0)
        pop_sd = members.std(axis=0, ddof=0)
        if stat == "mean" and n >= 2:
            sample_sd = members.std(axis=0, ddof=1)
            half = Z_99 * sample_sd / math.sqrt(n)
            ci_low, ci_high = center - half, center + half
        elif stat == "mean":
            ci_low, ci_high = center.copy(), center.copy()
        else:
            ci_low = ci_high = None
        shapes.append(AggregateShape(
            cluster_id=int(cid), stat=stat, center=center,
            ci99_low=ci_low, ci99_high=ci_high,
            sd_low=center - pop_sd, sd_high=center + pop_sd,
            n=n, share=n / total,
        ))
    return shapes
