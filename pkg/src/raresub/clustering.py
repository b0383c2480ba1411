"""k-means with k-means++ seeding, silhouette, Davies-Bouldin and the k scan."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CoincidentCentroids, DegenerateData, KTooLarge, NonFinite, SingleCluster

MAX_ITER = 300
REL_TOL = 1e-6


@dataclass(frozen=True)
class LatentMatrix:
    sample_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != len(self.sample_ids):
            raise ValueError("latent values must be (n_samples, latent_dim)")
        if not np.all(np.isfinite(values)):
            raise NonFinite("latent matrix contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))


@dataclass
class ClusteringSolution:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_init: int
    seed: int
    n_iter: int = 0
    inertia_trace: list[float] = field(default_factory=list)

    def sizes(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.k).tolist()

    def to_json(self, sample_ids: Sequence[str]) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "n_init": self.n_init,
            "inertia": self.inertia,
            "labels": {s: int(c) for s, c in zip(sample_ids, self.labels)},
            "centroids": self.centroids.tolist(),
        }


@dataclass
class KScanRow:
    k: int
    silhouette: float
    dbi: float
    sizes: list[int]
    inertia: float


@dataclass
class KScanResult:
    rows: list[KScanRow]
    solutions: dict[int, ClusteringSolution] = field(default_factory=dict, repr=False)

    def row(self, k: int) -> KScanRow:
        for r in self.rows:
            if r.k == k:
                return r
        raise KeyError(k)

    def best_silhouette_k(self) -> int:
        # first k wins ties
        return max(self.rows, key=lambda r: (r.silhouette, -r.k)).k

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "silhouette", "dbi", "sizes", "inertia"])
            for r in self.rows:
                w.writerow([r.k, repr(r.silhouette), repr(r.dbi), json.dumps(r.sizes), repr(r.inertia)])


def _values(Z) -> np.ndarray:
    return np.asarray(getattr(Z, "values", Z), dtype=np.float64)


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(axis=1)[:, None] + (C * C).sum(axis=1)[None, :] - 2.0 * (X @ C.T)
    return np.maximum(d, 0.0)


def pairwise_distances(X: np.ndarray, block: int = 64) -> np.ndarray:
    """Euclidean distances from explicit differences (no dot-product shortcut)."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    D = np.empty((n, n))
    for start in range(0, n, block):
        diff = X[start:start + block, None, :] - X[None, :, :]
        D[start:start + block] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return D


def kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = sq_distances(X, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        closest = np.minimum(closest, sq_distances(X, centers[c:c + 1])[:, 0])
    return centers


def _repair_empty(X, labels, d2, k):
    """Move the point farthest from its centroid into each empty cluster."""
    counts = np.bincount(labels, minlength=k)
    while np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        own = d2[np.arange(len(labels)), labels]
        # never steal the last member of a cluster
        own = np.where(counts[labels] > 1, own, -np.inf)
        far = int(np.argmax(own))
        counts[labels[far]] -= 1
        labels[far] = empty
        counts[empty] += 1
    return labels


def _lloyd(X, centers, k):
    trace = []
    prev = np.inf
    labels = None
    n_iter = 0
    for n_iter in range(1, MAX_ITER + 1):
        d2 = sq_distances(X, centers)
        labels = np.argmin(d2, axis=1)
        labels = _repair_empty(X, labels, d2, k)
        centers = np.stack([X[labels == c].mean(axis=0) for c in range(k)])
        inertia = float(((X - centers[labels]) ** 2).sum())
        trace.append(inertia)
        if inertia == 0.0 or (np.isfinite(prev) and prev - inertia <= REL_TOL * prev):
            break
        prev = inertia
    return labels, centers, trace, n_iter


def kmeans(Z, k: int, n_init: int = 10, seed: int = 0) -> ClusteringSolution:
    """Best-inertia solution over ``n_init`` seeded k-means++ / Lloyd runs.

    Restart ``i`` uses seed ``seed + i``; on equal inertia the earliest restart
    is kept.
    """
    X = _values(Z)
    n = X.shape[0]
    if k < 1 or n_init < 1:
        raise ValueError("k and n_init must be positive")
    if k > n:
        raise KTooLarge(f"k={k} exceeds the number of samples ({n})")
    if len(np.unique(X, axis=0)) < k:
        raise DegenerateData(f"fewer than k={k} distinct points")
    best = None
    for i in range(n_init):
        rng = np.random.default_rng(seed + i)
        centers = kmeans_plus_plus(X, k, rng)
        labels, centers, trace, n_iter = _lloyd(X, centers, k)
        inertia = trace[-1]
        if best is None or inertia < best.inertia:
            best = ClusteringSolution(k, labels, centers, inertia, n_init, seed, n_iter, trace)
    return best


def silhouette_samples(Z, labels) -> np.ndarray:
    X = _values(Z)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    D = pairwise_distances(X)
    n = len(labels)
    onehot = (labels[:, None] == uniq[None, :]).astype(np.float64)
    counts = onehot.sum(axis=0)
    sums = D @ onehot
    own = np.searchsorted(uniq, labels)
    own_count = counts[own]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = sums[np.arange(n), own] / (own_count - 1)
        means = sums / counts[None, :]
    means[np.arange(n), own] = np.inf
    b = means.min(axis=1)
    s = np.zeros(n)
    ok = own_count > 1
    denom = np.maximum(a, b)
    valid = ok & (denom > 0)
    s[valid] = (b[valid] - a[valid]) / denom[valid]
    return s


def silhouette(Z, labels) -> float:
    """Mean silhouette; singleton clusters and a == b == 0 contribute 0."""
    return float(np.mean(silhouette_samples(Z, labels)))


def davies_bouldin(Z, labels) -> float:
    X = _values(Z)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise SingleCluster("Davies-Bouldin needs at least two clusters")
    cents = np.stack([X[labels == c].mean(axis=0) for c in uniq])
    scatter = np.array(
        [np.linalg.norm(X[labels == c] - cents[i], axis=1).mean() for i, c in enumerate(uniq)]
    )
    dist = pairwise_distances(cents)
    np.fill_diagonal(dist, np.inf)
    if np.any(dist == 0):
        raise CoincidentCentroids("two clusters share a centroid")
    ratio = (scatter[:, None] + scatter[None, :]) / dist
    return float(ratio.max(axis=1).mean())


def scan_k(Z, k_range: Sequence[int], n_init: int = 10, seed: int = 42) -> KScanResult:
    rows, sols = [], {}
    for k in k_range:
        sol = kmeans(Z, k, n_init=n_init, seed=seed)
        rows.append(
            KScanRow(k, silhouette(Z, sol.labels), davies_bouldin(Z, sol.labels), sol.sizes(), sol.inertia)
        )
        sols[k] = sol
    return KScanResult(rows, sols)


def pca_2d(Z) -> np.ndarray:
    """Top-2 principal component scores; each axis's largest |loading| is positive."""
    X = _values(Z)
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    comps = vt[:2].copy()
    for i in range(comps.shape[0]):
        if comps[i, np.argmax(np.abs(comps[i]))] < 0:
            comps[i] = -comps[i]
    scores = Xc @ comps.T
    if scores.shape[1] < 2:
        scores = np.hstack([scores, np.zeros((scores.shape[0], 2 - scores.shape[1]))])
    return scores
