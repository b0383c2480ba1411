"""Cluster-vs-rest differential expression on z-scored expression."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ClusterTooSmall
from .stats import bh_fdr, welch_t_columns

DEFAULT_FDR_THRESHOLD = 0.05
N_MARKERS = 20
VOLCANO_Y_CAP = 320.0


@dataclass(frozen=True)
class DeRow:
    gene_id: str
    effect: float
    t: float
    df: float
    p: float
    fdr: float


@dataclass
class DeTable:
    """Rows sorted by ascending FDR, then descending |effect|, then gene id."""

    rows: list[DeRow]
    cluster_id: int
    n_in: int
    n_out: int

    def __len__(self) -> int:
        return len(self.rows)

    def gene_ids(self) -> list[str]:
        return [r.gene_id for r in self.rows]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["gene", "effect", "t", "df", "p", "fdr"])
            for r in self.rows:
                w.writerow([r.gene_id, repr(r.effect), repr(r.t), repr(r.df), repr(r.p), repr(r.fdr)])


@dataclass
class MarkerSelection:
    top_up: list[str]
    top_down: list[str]
    fdr_threshold: float
    shortfall: dict[str, int] = field(default_factory=dict)


def _membership(labels, cluster_id) -> np.ndarray:
    labels = np.asarray(labels)
    inside = labels == cluster_id
    n_in = int(inside.sum())
    if n_in < 2 or labels.size - n_in < 2:
        raise ClusterTooSmall(
            f"cluster {cluster_id} has {n_in} members and {labels.size - n_in} others; need >= 2 each"
        )
    return inside


def de_cluster_vs_rest(X_z, labels, cluster_id: int) -> DeTable:
    values = np.asarray(X_z.values, dtype=np.float64)
    inside = _membership(labels, cluster_id)
    tests = welch_t_columns(values[inside], values[~inside])
    q = bh_fdr([t.p_value for t in tests])
    rows = [
        DeRow(g, t.effect, t.t_stat, t.df, float(t.p_value), float(qv))
        for g, t, qv in zip(X_z.gene_ids, tests, q)
    ]
    rows.sort(key=lambda r: (r.fdr, -abs(r.effect), r.gene_id))
    return DeTable(rows, int(cluster_id), int(inside.sum()), int((~inside).sum()))


def select_markers(table: DeTable, fdr_threshold: float = DEFAULT_FDR_THRESHOLD,
                   n: int = N_MARKERS) -> MarkerSelection:
    sig = [r for r in table.rows if r.fdr < fdr_threshold]
    up = sorted((r for r in sig if r.effect > 0), key=lambda r: (-r.effect, r.gene_id))[:n]
    down = sorted((r for r in sig if r.effect < 0), key=lambda r: (r.effect, r.gene_id))[:n]
    shortfall = {}
    if len(up) < n:
        shortfall["up"] = n - len(up)
    if len(down) < n:
        shortfall["down"] = n - len(down)
    return MarkerSelection([r.gene_id for r in up], [r.gene_id for r in down], fdr_threshold, shortfall)


@dataclass(frozen=True)
class VolcanoPoint:
    gene_id: str
    effect: float
    neg_log10_fdr: float
    highlighted: bool
    label: str | None


def _neg_log10(q: float) -> float:
    if q <= 0:
        return VOLCANO_Y_CAP
    return min(VOLCANO_Y_CAP, -math.log10(q)) + 0.0


def volcano_data(table: DeTable, fdr_threshold: float, effect_threshold: float) -> list[VolcanoPoint]:
    if fdr_threshold <= 0 or effect_threshold <= 0:
        raise ValueError("thresholds must be positive")
    out = []
    for r in table.rows:
        hl = r.fdr < fdr_threshold and abs(r.effect) >= effect_threshold
        out.append(VolcanoPoint(r.gene_id, r.effect, _neg_log10(r.fdr), hl, r.gene_id if hl else None))
    return out


@dataclass
class HeatmapData:
    gene_ids: list[str]
    sample_ids: list[str]
    values: np.ndarray  # genes x samples
    n_in: int
    n_down: int


def heatmap_data(X_z, labels, cluster_id: int, sel: MarkerSelection) -> HeatmapData:
    inside = _membership(labels, cluster_id)
    genes = list(sel.top_down) + list(sel.top_up)
    if not genes:
        raise ValueError("marker selection is empty")
    col = {g: j for j, g in enumerate(X_z.gene_ids)}
    order = np.concatenate([np.flatnonzero(inside), np.flatnonzero(~inside)])
    values = np.asarray(X_z.values)[np.ix_(order, [col[g] for g in genes])].T
    return HeatmapData(genes, [X_z.sample_ids[i] for i in order], values,
                       int(inside.sum()), len(sel.top_down))


def write_volcano_csv(points: Sequence[VolcanoPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gene", "effect", "neg_log10_fdr", "highlighted", "label"])
        for p in points:
            w.writerow([p.gene_id, repr(p.effect), repr(p.neg_log10_fdr), str(p.highlighted).lower(), p.label or ""])


def write_heatmap_csv(h: HeatmapData, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gene", *h.sample_ids])
        for g, row in zip(h.gene_ids, h.values):
            w.writerow([g, *(repr(float(v)) for v in row)])
