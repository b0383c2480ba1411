"""Contingency tables, run manifests, and figure artifacts (CSV twin + SVG)."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, svg
from .errors import LengthMismatch, MissingUpstream

OUT_ENV = "RARESUB_OUT"


# ---------------------------------------------------------------- contingency

@dataclass
class ContingencyTable:
    row_labels: list[str]
    col_labels: list[int]
    counts: np.ndarray

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / self.counts.sum(axis=1, keepdims=True)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def modal_capture(self) -> dict[str, float]:
        """Share of each class that falls in its most common cluster."""
        p = self.proportions
        return {r: float(p[i].max()) for i, r in enumerate(self.row_labels)}

    def to_csv(self, path, normalized: bool = False) -> None:
        data = self.proportions if normalized else self.counts
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["class", *self.col_labels])
            for lab, row in zip(self.row_labels, data):
                w.writerow([lab, *(repr(float(v)) if normalized else int(v) for v in row)])


def contingency(class_labels: Sequence[str], cluster_labels: Sequence[int]) -> ContingencyTable:
    if len(class_labels) != len(cluster_labels):
        raise LengthMismatch(f"{len(class_labels)} class labels vs {len(cluster_labels)} cluster labels")
    rows = sorted(set(class_labels))
    cols = sorted({int(c) for c in cluster_labels})
    ri = {r: i for i, r in enumerate(rows)}
    ci = {c: j for j, c in enumerate(cols)}
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for a, b in zip(class_labels, cluster_labels):
        counts[ri[a], ci[int(b)]] += 1
    return ContingencyTable(rows, cols, counts)


# ---------------------------------------------------------------- manifest / run dirs

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "command": self.command,
            "argv": self.argv,
            "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "software": {
                "raresub": __version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "platform": platform.platform(),
            },
            "seeds": {
                "autoencoder": cfg.get("ae_seed"),
                "kmeans": cfg.get("seed"),
                "stability_runs": [cfg.get("seed", 0) + r for r in range(cfg.get("runs", 0))],
            },
            "decisions": {
                "variance_ddof": cfg.get("variance_ddof"),
                "weight_decay_mode": cfg.get("weight_decay_mode"),
                "reference_run_index": cfg.get("reference_run"),
                "loss_normalization": "per-entry MSE (sum / (N * D_in))",
                "kmeans_init": "k-means++; restart i uses seed + i",
                "hvg_ties": "smaller column index first",
                "welch_variance_ddof": 1,
            },
            "config": cfg,
            "inputs": {k: {"path": v, "sha256": sha256_file(v)} for k, v in self.inputs.items()},
            **self.extra,
        }

    def write(self, directory) -> Path:
        path = Path(directory) / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, default=_json_default))
        return path


def make_run_dir(root=None, command: str = "run") -> Path:
    root = Path(root or os.environ.get(OUT_ENV) or "runs")
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S-%f")
    path = root / f"{command}-{stamp}"
    path.mkdir(parents=True, exist_ok=False)
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, tuple)):
        return list(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


# ---------------------------------------------------------------- figure twins

def _write_rows(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def _read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _num(x) -> str:
    return repr(float(x))


def _bool(x) -> str:
    return str(bool(x)).lower()


def render_figure(name: str, twin_path) -> str:
    """Render the SVG for one figure from its CSV twin."""
    rows = _read_rows(twin_path)
    if name in ("silhouette", "dbi"):
        xs = [int(r["k"]) for r in rows]
        label = "silhouette" if name == "silhouette" else "Davies-Bouldin index"
        return svg.line_chart(f"{label} vs k", xs, {name: [float(r[name]) for r in rows]}, "k", label)
    if name == "training":
        xs = [int(r["epoch"]) for r in rows]
        return svg.line_chart(
            "autoencoder reconstruction MSE", xs,
            {"train": [float(r["train_mse"]) for r in rows], "validation": [float(r["val_mse"]) for r in rows]},
            "epoch", "MSE per entry",
        )
    if name == "cluster_sizes":
        return svg.bar_chart(
            "cluster sizes", [f"C{r['cluster']}" for r in rows], [int(r["size"]) for r in rows],
            [svg.RED if r["highlight"] == "true" else svg.GREY for r in rows], "cluster", "samples",
        )
    if name == "stability_bars":
        thr = float(rows[0]["threshold"]) if rows else 0.6
        return svg.bar_chart(
            "cluster stability (mean aligned Jaccard)", [f"C{r['cluster']}" for r in rows],
            [float(r["jaccard"]) for r in rows],
            [svg.RED if r["highlight"] == "true" else svg.GREY for r in rows],
            "cluster", "Jaccard", threshold=thr, ymax=1.05,
        )
    if name == "volcano":
        return svg.scatter(
            "volcano", [float(r["effect"]) for r in rows], [float(r["neg_log10_fdr"]) for r in rows],
            [svg.RED if r["highlighted"] == "true" else svg.GREY for r in rows],
            "effect (z units)", "-log10 FDR", labels=[r["label"] for r in rows],
        )
    if name == "latent_pca":
        return svg.scatter(
            "latent space (PCA)", [float(r["pc1"]) for r in rows], [float(r["pc2"]) for r in rows],
            [svg.RED if r["highlight"] == "true" else svg.GREY for r in rows], "PC1", "PC2",
        )
    if name == "heatmap":
        samples = [c for c in rows[0].keys() if c not in ("gene", "direction")] if rows else []
        members = _read_rows(Path(twin_path).with_name("heatmap_samples.csv"))
        n_in = sum(1 for m in members if m["in_cluster"] == "true")
        matrix = [[float(r[s]) for s in samples] for r in rows]
        return svg.heatmap("marker heatmap (z-scores; cluster members left)", matrix,
                           [r["gene"] for r in rows], split_col=n_in)
    raise KeyError(name)


FIGURES = ("silhouette", "dbi", "training", "cluster_sizes", "stability_bars", "volcano", "latent_pca", "heatmap")


def render_all(fig_dir) -> list[str]:
    fig_dir = Path(fig_dir)
    done = []
    for name in FIGURES:
        twin = fig_dir / f"{name}.csv"
        if twin.exists():
            (fig_dir / f"{name}.svg").write_text(render_figure(name, twin))
            done.append(name)
    return done


def emit_figures(out_dir, *, kscan=None, history=None, labels=None, k: Optional[int] = None,
                 stability_rows=None, rare_cluster: Optional[int] = None, de=None, markers=None,
                 scaled=None, latent=None, stable_threshold: float = 0.60,
                 volcano_fdr: float = 1e-8, volcano_effect: float = 0.6) -> dict:
    """Write CSV twins for every available figure, then render them to SVG.

    Returns ``{"figures": [...], "notes": [...]}``.
    """
    from .clustering import pca_2d
    from .diffexpr import heatmap_data, volcano_data, write_heatmap_csv, write_volcano_csv

    if kscan is None:
        raise MissingUpstream("figures need at least the k-scan result")
    fig = Path(out_dir) / "figures"
    fig.mkdir(parents=True, exist_ok=True)
    notes = []
    _write_rows(fig / "silhouette.csv", ["k", "silhouette"], [[r.k, _num(r.silhouette)] for r in kscan.rows])
    _write_rows(fig / "dbi.csv", ["k", "dbi"], [[r.k, _num(r.dbi)] for r in kscan.rows])
    if history is not None:
        _write_rows(fig / "training.csv", ["epoch", "train_mse", "val_mse"],
                    [[i + 1, _num(a), _num(b)] for i, (a, b) in enumerate(zip(history.train_mse, history.val_mse))])
    if labels is not None and k is not None:
        sizes = np.bincount(np.asarray(labels), minlength=k)
        n = int(sizes.sum())
        _write_rows(fig / "cluster_sizes.csv", ["cluster", "size", "prevalence", "highlight"],
                    [[c, int(s), _num(s / n), _bool(c == rare_cluster)] for c, s in enumerate(sizes)])
    if stability_rows:
        _write_rows(fig / "stability_bars.csv", ["cluster", "jaccard", "rare", "stable", "threshold", "highlight"],
                    [[r.cluster, _num(r.jaccard), _bool(r.rare), _bool(r.stable), _num(stable_threshold),
                      _bool(r.cluster == rare_cluster)] for r in stability_rows])
    if latent is not None and labels is not None:
        pcs = pca_2d(latent)
        _write_rows(fig / "latent_pca.csv", ["sample", "pc1", "pc2", "cluster", "highlight"],
                    [[s, _num(p[0]), _num(p[1]), int(c), _bool(c == rare_cluster)]
                     for s, p, c in zip(latent.sample_ids, pcs, labels)])
    if de is None or rare_cluster is None:
        notes.append("no rare-and-stable cluster selected: volcano and heatmap skipped")
    else:
        write_volcano_csv(volcano_data(de, volcano_fdr, volcano_effect), fig / "volcano.csv")
        if markers is not None and (markers.top_up or markers.top_down):
            h = heatmap_data(scaled, labels, rare_cluster, markers)
            with open(fig / "heatmap.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["gene", "direction", *h.sample_ids])
                for i, (g, row) in enumerate(zip(h.gene_ids, h.values)):
                    w.writerow([g, "down" if i < h.n_down else "up", *(_num(v) for v in row)])
            _write_rows(fig / "heatmap_samples.csv", ["sample", "in_cluster"],
                        [[s, _bool(i < h.n_in)] for i, s in enumerate(h.sample_ids)])
        else:
            notes.append("no FDR-significant markers: heatmap skipped")
    done = render_all(fig)
    return {"figures": done, "notes": notes}


# ---------------------------------------------------------------- run writers

def write_within_outputs(out_dir, result, cfg) -> dict:
    out = Path(out_dir)
    emb = result.embedding
    result.kscan.to_csv(out / "kscan.csv")
    result.discovery.to_csv(out / "stability.csv")
    write_json(out / "discovery.json", result.discovery.to_json())
    emb.history.to_csv(out / "training_history.csv")
    emb.model.save(out / "autoencoder.json")
    write_json(out / "preprocess.json", emb.scaled.sidecar())
    latent_rows = [[s, *(_num(v) for v in row)] for s, row in zip(emb.latent.sample_ids, emb.latent.values)]
    _write_rows(out / "latent.csv", ["sample", *(f"z{i}" for i in range(emb.latent.values.shape[1]))], latent_rows)
    labels = None
    if result.final is not None:
        labels = result.final.labels
        _write_rows(out / "labels.csv", ["sample", "cluster"],
                    [[s, int(c)] for s, c in zip(emb.latent.sample_ids, labels)])
        write_json(out / "final_solution.json", result.final.to_json(emb.latent.sample_ids))
        if result.de is not None:
            result.de.to_csv(out / f"de_c{result.rare_cluster}.csv")
        if result.markers is not None:
            write_json(out / "markers.json", {
                "cluster": result.rare_cluster, "top_up": result.markers.top_up,
                "top_down": result.markers.top_down, "fdr_threshold": result.markers.fdr_threshold,
                "shortfall": result.markers.shortfall,
            })
        k, stab = result.final.k, result.final_stability
    else:
        k = result.kscan.best_silhouette_k()
        labels = result.discovery.reference_labels.get(k, result.kscan.solutions[k].labels)
        stab = [r for r in result.discovery.rows if r.k == k]
    figs = emit_figures(
        out, kscan=result.kscan, history=emb.history, labels=labels, k=k, stability_rows=stab,
        rare_cluster=result.rare_cluster, de=result.de, markers=result.markers, scaled=emb.scaled,
        latent=emb.latent, stable_threshold=cfg.stable_threshold,
        volcano_fdr=cfg.volcano_fdr, volcano_effect=cfg.volcano_effect,
    )
    summary = dict(result.summary)
    summary["figures"] = figs
    write_json(out / "summary.json", summary)
    return summary


def write_pan_outputs(out_dir, result, cfg) -> dict:
    from .stability import write_stability_csv

    out = Path(out_dir)
    emb = result.embedding
    result.kscan.to_csv(out / "kscan.csv")
    result.table.to_csv(out / "contingency.csv")
    result.table.to_csv(out / "contingency_normalized.csv", normalized=True)
    write_stability_csv(result.stability, out / "stability.csv")
    emb.history.to_csv(out / "training_history.csv")
    _write_rows(out / "labels.csv", ["sample", "class", "cluster"],
                [[s, c, int(l)] for s, c, l in zip(emb.latent.sample_ids, result.class_labels, result.solution.labels)])
    figs = emit_figures(out, kscan=result.kscan, history=emb.history, labels=result.solution.labels,
                        k=result.k, stability_rows=result.stability, latent=emb.latent,
                        stable_threshold=cfg.stable_threshold)
    summary = dict(result.summary)
    summary["figures"] = {"figures": figs["figures"], "notes": ["pan-cancer run: no DE figures"]}
    write_json(out / "summary.json", summary)
    return summary
