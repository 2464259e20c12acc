"""Uncertainty-weighted K-means over the query pool.

Lloyd iterations alternate nearest-centroid assignment with centroids set to
the uncertainty-weighted mean of their members, so high-uncertainty samples
pull centroids toward themselves and dense uncertain areas split into their
own regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import parallel

_ASSIGN_CHUNK = 8192


class ClusteringError(ValueError):
    """Invalid clustering input."""


@dataclass
class RegionPartition:
    """Result of one weighted K-means run over the query pool.

    `assignment[r]` is the cluster of row r of the clustered matrix;
    `members[k]` holds the external sample ids assigned to cluster k
    (`indices[r]` maps rows to ids).  `inertia_history` records the weighted
    inertia after every assignment step, first entry at initialization.
    """

    centroids: np.ndarray
    assignment: np.ndarray
    members: list[np.ndarray]
    weighted_inertia: float
    indices: np.ndarray
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    def live_clusters(self) -> list[int]:
        return [k for k in range(self.K) if self.members[k].size > 0]


def _nearest(vectors: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row nearest centroid (ties to the lowest cluster id) and squared distance.

    Distances use the direct (v - mu)^2 expansion in fixed-size chunks, so the
    arithmetic is identical for any pool size or worker count (each chunk
    writes its own output slice).
    """
    n = vectors.shape[0]
    assignment = np.empty(n, dtype=np.int64)
    sq_dist = np.empty(n, dtype=np.float64)

    def one_chunk(start: int, stop: int) -> None:
        block = vectors[start:stop]
        diffs = block[:, None, :] - centroids[None, :, :]
        d2 = (diffs * diffs).sum(axis=-1)
        best = np.argmin(d2, axis=1)
        assignment[start:stop] = best
        sq_dist[start:stop] = d2[np.arange(block.shape[0]), best]

    parallel.run_chunked(one_chunk, n, _ASSIGN_CHUNK)
    return assignment, sq_dist


def kmeanspp_init(vectors: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """Standard unweighted K-Means++ seeding: first center uniform, each later
    center drawn with probability proportional to squared distance to the
    nearest chosen center."""
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    if K <= 0:
        raise ClusteringError(f"K must be positive, got {K}")
    if K > n:
        raise ClusteringError(f"K={K} exceeds number of points {n}")
    if not np.isfinite(vectors).all():
        raise ClusteringError("vectors contain non-finite values")

    centroids = np.empty((K, vectors.shape[1]), dtype=np.float64)
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centroids[0] = vectors[first]
    chosen[first] = True

    closest = ((vectors - centroids[0]) ** 2).sum(axis=1)
    for k in range(1, K):
        total = float(closest.sum())
        if total > 0.0:
            pick = int(rng.choice(n, p=closest / total))
        else:
            # all remaining points coincide with chosen centers
            pick = int(rng.choice(np.flatnonzero(~chosen)))
        centroids[k] = vectors[pick]
        chosen[pick] = True
        closest = np.minimum(closest, ((vectors - centroids[k]) ** 2).sum(axis=1))
    return centroids


def _weighted_centroids(
    vectors: np.ndarray,
    weights: np.ndarray,
    assignment: np.ndarray,
    K: int,
    previous: np.ndarray,
) -> np.ndarray:
    """Weighted mean per cluster; zero-weight clusters fall back to the plain
    mean of their members, empty clusters keep their previous centroid."""
    d = vectors.shape[1]
    sums = np.zeros((K, d), dtype=np.float64)
    np.add.at(sums, assignment, vectors * weights[:, None])
    wsum = np.bincount(assignment, weights=weights, minlength=K)
    counts = np.bincount(assignment, minlength=K)

    centroids = previous.copy()
    good = wsum > 0.0
    centroids[good] = sums[good] / wsum[good, None]
    degenerate = (~good) & (counts > 0)
    if degenerate.any():
        plain = np.zeros((K, d), dtype=np.float64)
        np.add.at(plain, assignment, vectors)
        for k in np.flatnonzero(degenerate):
            centroids[k] = plain[k] / counts[k]
    return centroids


def weighted_kmeans(
    vectors: np.ndarray,
    weights: np.ndarray,
    K: int,
    max_iter: int = 100,
    tol: float = 1e-4,
    rng: np.random.Generator | None = None,
    init: np.ndarray | None = None,
    indices: np.ndarray | None = None,
) -> RegionPartition:
    """Lloyd iterations with weighted centroid updates.

    Stops at an assignment fixed point, when the relative improvement of the
    weighted inertia drops below `tol`, or after `max_iter` iterations.
    Clusters that empty out are re-seeded with the point of largest weighted
    squared residual, which keeps all K regions alive for ranking.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    n = vectors.shape[0]
    if weights.shape != (n,):
        raise ClusteringError(f"weights shape {weights.shape} does not match {n} points")
    if not np.isfinite(vectors).all():
        raise ClusteringError("vectors contain non-finite values")
    if not np.isfinite(weights).all() or (weights < 0).any():
        raise ClusteringError("weights must be finite and non-negative")
    if not (weights > 0).any():
        raise ClusteringError("weights must not all be zero")
    if K <= 0 or K > n:
        raise ClusteringError(f"K={K} must lie in [1, {n}]")

    if init is not None:
        centroids = np.array(init, dtype=np.float64, copy=True)
        if centroids.shape != (K, vectors.shape[1]):
            raise ClusteringError(f"init shape {centroids.shape} != ({K}, {vectors.shape[1]})")
    else:
        if rng is None:
            rng = np.random.default_rng()
        centroids = kmeanspp_init(vectors, K, rng)

    if indices is None:
        indices = np.arange(n, dtype=np.int64)
    else:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.shape != (n,):
            raise ClusteringError("indices length mismatch")

    assignment, sq = _nearest(vectors, centroids)
    inertia = float((weights * sq).sum())
    history = [inertia]

    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centroids = _weighted_centroids(vectors, weights, assignment, K, centroids)

        counts = np.bincount(assignment, minlength=K)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            # re-seed each empty cluster with the point carrying the largest
            # weighted squared residual (one point per empty cluster)
            _, res_sq = _nearest(vectors, centroids)
            residual = weights * res_sq
            order = np.argsort(-residual, kind="stable")
            for k, row in zip(empty, order[: empty.size]):
                centroids[k] = vectors[row]

        new_assignment, sq = _nearest(vectors, centroids)
        new_inertia = float((weights * sq).sum())
        history.append(new_inertia)

        converged = bool((new_assignment == assignment).all())
        improved = inertia - new_inertia
        assignment = new_assignment
        if converged:
            inertia = new_inertia
            break
        if tol > 0.0 and inertia > 0.0 and improved < tol * inertia:
            inertia = new_inertia
            break
        inertia = new_inertia

    members = [indices[assignment == k] for k in range(K)]
    return RegionPartition(
        centroids=centroids,
        assignment=assignment,
        members=members,
        weighted_inertia=inertia,
        indices=indices,
        n_iter=n_iter,
        inertia_history=history,
    )
