"""Seed-stability of k-means clusters and the rare-and-stable discovery rule.

For each k, R labelings are produced with seeds ``base_seed .. base_seed+R-1``.
The first is the reference; every other run is relabeled onto it with an exact
assignment solve, and each reference cluster gets the mean Jaccard overlap
with its aligned counterparts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .clustering import ClusteringSolution, kmeans, silhouette
from .errors import LabelOutOfRange, NonFinite, NonSquare

RARE_THRESHOLD = 0.10
STABLE_THRESHOLD = 0.60


# ---------------------------------------------------------------- assignment

def _assign(cost: np.ndarray) -> list[int]:
    """O(n^3) shortest-augmenting-path Hungarian method; row -> column."""
    n = cost.shape[0]
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row matched to column j (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = [0] * n
    for j in range(1, n + 1):
        if p[j]:
            assignment[p[j] - 1] = j - 1
    return assignment


def _total(cost: np.ndarray, perm: Sequence[int]) -> float:
    total = 0.0
    for i, j in enumerate(perm):
        total += float(cost[i, j])
    return total


def hungarian(cost) -> tuple[tuple[int, ...], float]:
    """Exact minimum-cost perfect assignment of rows to columns.

    Among optimal assignments the lexicographically smallest permutation is
    returned: rows are fixed in order to the smallest column that still admits
    an optimal completion. That refinement costs O(n^5) and is intended for the
    small (k <= ~20) matrices used for label alignment.
    """
    C = np.asarray(cost, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise NonSquare(f"cost matrix must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise NonFinite("cost matrix has non-finite entries")
    n = C.shape[0]
    if n == 0:
        return (), 0.0
    best = _assign(C)
    optimum = _total(C, best)
    tol = 1e-12 * (1.0 + np.abs(C).sum())
    fixed: list[int] = []
    free = list(range(n))
    prefix = 0.0
    for i in range(n):
        for j in free:
            rest_cols = [c for c in free if c != j]
            rest = 0.0
            if rest_cols:
                sub = C[np.ix_(range(i + 1, n), rest_cols)]
                rest = _total(sub, _assign(sub))
            if prefix + C[i, j] + rest <= optimum + tol:
                fixed.append(j)
                free.remove(j)
                prefix += C[i, j]
                break
        else:  # pragma: no cover - unreachable for finite input
            raise RuntimeError("assignment refinement failed")
    perm = tuple(fixed)
    return perm, _total(C, perm)


# ---------------------------------------------------------------- alignment

@dataclass
class LabelAlignment:
    """``permutation[run_cluster] = reference_cluster``."""

    permutation: tuple[int, ...]
    overlap: np.ndarray  # overlap[run_cluster, reference_cluster]
    aligned_labels: np.ndarray

    @property
    def agreement(self) -> int:
        return int(sum(self.overlap[a, b] for a, b in enumerate(self.permutation)))


def overlap_matrix(reference_labels, run_labels, k: int) -> np.ndarray:
    ref = np.asarray(reference_labels, dtype=int)
    run = np.asarray(run_labels, dtype=int)
    if ref.shape != run.shape:
        raise ValueError("labelings must have the same length")
    for lab in (ref, run):
        if lab.size and (lab.min() < 0 or lab.max() >= k):
            raise LabelOutOfRange(f"labels must lie in [0, {k})")
    overlap = np.zeros((k, k), dtype=np.int64)
    np.add.at(overlap, (run, ref), 1)
    return overlap


def align(reference_labels, run_labels, k: int) -> LabelAlignment:
    overlap = overlap_matrix(reference_labels, run_labels, k)
    perm, _ = hungarian(-overlap)
    mapping = np.asarray(perm, dtype=int)
    return LabelAlignment(perm, overlap, mapping[np.asarray(run_labels, dtype=int)])


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = a | b
    return len(a & b) / len(union) if union else 1.0


# ---------------------------------------------------------------- stability

@dataclass
class ClusterStability:
    k: int
    cluster: int
    size: int
    prevalence: float
    jaccard: float
    rare: bool
    stable: bool


def flags(prevalence: float, jaccard_value: float, rare_threshold: float = RARE_THRESHOLD,
          stable_threshold: float = STABLE_THRESHOLD) -> tuple[bool, bool]:
    return bool(prevalence < rare_threshold), bool(jaccard_value >= stable_threshold)


def stability_runs(Z, k: int, R: int = 20, base_seed: int = 42, n_init: int = 10) -> list[ClusteringSolution]:
    if R < 2:
        raise ValueError("stability needs R >= 2 runs")
    return [kmeans(Z, k, n_init=n_init, seed=base_seed + r) for r in range(R)]


def jaccard_from_labelings(labelings: Sequence[np.ndarray], k: int) -> np.ndarray:
    """Mean aligned Jaccard per reference cluster; ``labelings[0]`` is the reference."""
    ref = np.asarray(labelings[0], dtype=int)
    totals = np.zeros(k)
    for run in labelings[1:]:
        aligned = align(ref, run, k).aligned_labels
        for c in range(k):
            in_ref = ref == c
            in_run = aligned == c
            union = np.count_nonzero(in_ref | in_run)
            totals[c] += np.count_nonzero(in_ref & in_run) / union if union else 1.0
    return totals / (len(labelings) - 1)


def summarize(ref_labels, jaccards, k: int, rare_threshold=RARE_THRESHOLD,
              stable_threshold=STABLE_THRESHOLD) -> list[ClusterStability]:
    ref = np.asarray(ref_labels, dtype=int)
    n = ref.size
    sizes = np.bincount(ref, minlength=k)
    rows = []
    for c in range(k):
        p = sizes[c] / n
        j = float(jaccards[c])
        rare, stable = flags(p, j, rare_threshold, stable_threshold)
        rows.append(ClusterStability(k, c, int(sizes[c]), float(p), j, rare, stable))
    return rows


def jaccard_stability(Z, k: int, R: int = 20, base_seed: int = 42, n_init: int = 10,
                      rare_threshold: float = RARE_THRESHOLD,
                      stable_threshold: float = STABLE_THRESHOLD) -> list[ClusterStability]:
    runs = stability_runs(Z, k, R, base_seed, n_init)
    labelings = [r.labels for r in runs]
    return summarize(labelings[0], jaccard_from_labelings(labelings, k), k,
                     rare_threshold, stable_threshold)


# ---------------------------------------------------------------- discovery

@dataclass
class DiscoveryReport:
    rows: list[ClusterStability]
    hits: list[tuple[int, int]]
    chosen: Optional[tuple[int, int]]
    rationale: str
    reference_labels: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    silhouettes: dict[int, float] = field(default_factory=dict)

    def row(self, k: int, cluster: int) -> ClusterStability:
        for r in self.rows:
            if r.k == k and r.cluster == cluster:
                return r
        raise KeyError((k, cluster))

    def members(self, k: int, cluster: int, sample_ids: Sequence[str]) -> list[str]:
        labels = self.reference_labels[k]
        return [s for s, c in zip(sample_ids, labels) if c == cluster]

    def to_json(self) -> dict:
        chosen = None
        if self.chosen is not None:
            row = self.row(*self.chosen)
            chosen = {"k": row.k, "cluster": row.cluster, "size": row.size,
                      "prevalence": row.prevalence, "jaccard": row.jaccard}
        return {
            "hits": [{"k": k, "cluster": c} for k, c in self.hits],
            "chosen": chosen,
            "rationale": self.rationale,
            "silhouettes": {str(k): v for k, v in self.silhouettes.items()},
        }

    def to_csv(self, path) -> None:
        write_stability_csv(self.rows, path)


def write_stability_csv(rows: Sequence[ClusterStability], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "cluster", "size", "prevalence", "jaccard", "rare", "stable"])
        for r in rows:
            d = asdict(r)
            w.writerow([d["k"], d["cluster"], d["size"], repr(d["prevalence"]), repr(d["jaccard"]),
                        str(d["rare"]).lower(), str(d["stable"]).lower()])


def choose(rows: Sequence[ClusterStability], silhouettes: dict[int, float]):
    hits = [r for r in rows if r.rare and r.stable]
    if not hits:
        return [], None, "no cluster is both rare and stable"
    # smallest k; then higher silhouette; then the rarer cluster; then higher Jaccard
    ordered = sorted(
        hits, key=lambda r: (r.k, -silhouettes.get(r.k, 0.0), r.prevalence, -r.jaccard, r.cluster)
    )
    best = ordered[0]
    rationale = (
        f"smallest k with a rare (p<thr) and stable (J>=thr) cluster is k={best.k}; "
        f"cluster {best.cluster} has prevalence {best.prevalence:.4f} and Jaccard {best.jaccard:.3f}"
    )
    return [(r.k, r.cluster) for r in hits], (best.k, best.cluster), rationale


def discovery_scan(Z, k_range: Sequence[int], R: int = 20, base_seed: int = 42, n_init: int = 10,
                   rare_threshold: float = RARE_THRESHOLD,
                   stable_threshold: float = STABLE_THRESHOLD) -> DiscoveryReport:
    rows: list[ClusterStability] = []
    refs: dict[int, np.ndarray] = {}
    sils: dict[int, float] = {}
    for k in k_range:
        labelings = [r.labels for r in stability_runs(Z, k, R, base_seed, n_init)]
        refs[k] = labelings[0]
        sils[k] = silhouette(Z, labelings[0])
        rows.extend(summarize(labelings[0], jaccard_from_labelings(labelings, k), k,
                              rare_threshold, stable_threshold))
    hits, chosen, rationale = choose(rows, sils)
    return DiscoveryReport(rows, hits, chosen, rationale, refs, sils)


def final_refit(Z, k: int, n_init: int = 30, seed: int = 42,
                reference_labels=None) -> ClusteringSolution:
    """High-n_init refit; optionally relabeled so cluster ids match a reference."""
    sol = kmeans(Z, k, n_init=n_init, seed=seed)
    if reference_labels is not None:
        al = align(reference_labels, sol.labels, k)
        inverse = np.argsort(np.asarray(al.permutation))
        sol.labels = al.aligned_labels
        sol.centroids = sol.centroids[inverse]
    return sol
