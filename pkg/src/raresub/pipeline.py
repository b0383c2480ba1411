"""End-to-end pan-cancer and within-cancer analyses (no file output)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autoencoder as ae
from .clustering import ClusteringSolution, KScanResult, LatentMatrix, kmeans, pca_2d, scan_k, silhouette_samples
from .config import PipelineConfig
from .data_ingest import ExpressionMatrix, filter_class
from .diffexpr import DeTable, MarkerSelection, de_cluster_vs_rest, select_markers
from .errors import ClusterTooSmall
from .preprocess import ScaledMatrix, preprocess
from .report import ContingencyTable, contingency
from .stability import (
    ClusterStability,
    DiscoveryReport,
    discovery_scan,
    final_refit,
    jaccard_stability,
)
from .stats import ContingencyResult, chi_square_independence

log = logging.getLogger(__name__)


@dataclass
class Embedding:
    scaled: ScaledMatrix
    model: ae.AutoencoderModel
    history: ae.TrainHistory
    latent: LatentMatrix


@dataclass
class WithinResult:
    embedding: Embedding
    kscan: KScanResult
    discovery: DiscoveryReport
    final: Optional[ClusteringSolution] = None
    final_stability: list[ClusterStability] = field(default_factory=list)
    rare_cluster: Optional[int] = None
    de: Optional[DeTable] = None
    markers: Optional[MarkerSelection] = None
    summary: dict = field(default_factory=dict)


@dataclass
class PanResult:
    embedding: Embedding
    kscan: KScanResult
    k: int
    solution: ClusteringSolution
    stability: list[ClusterStability]
    table: ContingencyTable
    chi: ContingencyResult
    class_labels: tuple[str, ...] = ()
    summary: dict = field(default_factory=dict)


def ae_config(cfg: PipelineConfig, input_dim: int) -> ae.AeConfig:
    return ae.AeConfig(
        input_dim=input_dim,
        latent_dim=cfg.latent_dim,
        dropout_p=cfg.dropout_p,
        learning_rate=cfg.learning_rate,
        weight_decay=cfg.weight_decay,
        batch_size=cfg.batch_size,
        val_fraction=cfg.val_fraction,
        patience=cfg.patience,
        max_epochs=cfg.max_epochs,
        seed=cfg.ae_seed,
    )


def embed(m: ExpressionMatrix, cfg: PipelineConfig) -> Embedding:
    scaled = preprocess(m, cfg.top_n, cfg.variance_ddof)
    acfg = ae_config(cfg, scaled.shape[1])
    model, history = ae.train(ae.build(acfg), scaled, acfg)
    latent = LatentMatrix(scaled.sample_ids, ae.encode(model, scaled))
    return Embedding(scaled, model, history, latent)


def rare_separation(Z, labels, cluster: int) -> dict:
    """Mean silhouette of the rare cluster in latent space and in its 2-D PCA view."""
    labels = np.asarray(labels)
    inside = labels == cluster
    return {
        "latent_silhouette": float(silhouette_samples(Z, labels)[inside].mean()),
        "pca_silhouette": float(silhouette_samples(pca_2d(Z), labels)[inside].mean()),
    }


def analyze_within(embedding: Embedding, cfg: PipelineConfig, k: Optional[int] = None,
                   cluster: Optional[int] = None) -> WithinResult:
    Z = embedding.latent
    kscan = scan_k(Z, cfg.k_range, cfg.n_init, cfg.seed)
    discovery = discovery_scan(Z, cfg.k_range, cfg.runs, cfg.seed, cfg.stability_n_init,
                               cfg.rare_threshold, cfg.stable_threshold)
    result = WithinResult(embedding, kscan, discovery)
    if k is None and discovery.chosen is not None:
        k, cluster = discovery.chosen
    if k is None:
        result.summary = {"k_chosen": None, "hits": [], "note": discovery.rationale}
        return result
    ref = discovery.reference_labels.get(k)
    final = final_refit(Z, k, cfg.final_n_init, cfg.seed, reference_labels=ref)
    result.final = final
    result.final_stability = [r for r in discovery.rows if r.k == k]
    if cluster is None:
        sizes = np.bincount(final.labels, minlength=k)
        cluster = int(np.argmin(sizes))
    result.rare_cluster = int(cluster)
    de_note = None
    try:
        result.de = de_cluster_vs_rest(embedding.scaled, final.labels, cluster)
        result.markers = select_markers(result.de, cfg.fdr_threshold, cfg.n_markers)
    except ClusterTooSmall as exc:
        de_note = f"differential expression skipped: {exc}"
        log.warning(de_note)
    row = kscan.row(k) if k in cfg.k_range else None
    stab = next((r for r in result.final_stability if r.cluster == cluster), None)
    sizes = final.sizes()
    n = len(final.labels)
    result.summary = {
        "k_chosen": k,
        "rare_cluster": int(cluster),
        "size": sizes[cluster],
        "prevalence": sizes[cluster] / n,
        "jaccard": stab.jaccard if stab else None,
        "silhouette": row.silhouette if row else None,
        "dbi": row.dbi if row else None,
        "final_sizes": sizes,
        "hits": [list(h) for h in discovery.hits],
        "separation": rare_separation(Z, final.labels, cluster),
        "top_gene": result.de.rows[0].gene_id if result.de else None,
        "top_gene_effect": result.de.rows[0].effect if result.de else None,
        "top_gene_fdr": result.de.rows[0].fdr if result.de else None,
        "marker_shortfall": result.markers.shortfall if result.markers else None,
        "ae_best_epoch": embedding.history.best_epoch,
        "ae_best_val_mse": embedding.history.best_val_mse,
    }
    if de_note:
        result.summary["note"] = de_note
    return result


def run_within(m: ExpressionMatrix, cfg: PipelineConfig, class_name: Optional[str] = None) -> WithinResult:
    if class_name is not None:
        m = filter_class(m, class_name)
    return analyze_within(embed(m, cfg), cfg, cfg.k, cfg.cluster)


def run_pan(m: ExpressionMatrix, cfg: PipelineConfig) -> PanResult:
    if m.class_labels is None:
        raise ValueError("pan-cancer control needs class labels")
    emb = embed(m, cfg)
    Z = emb.latent
    kscan = scan_k(Z, cfg.k_range, cfg.n_init, cfg.seed)
    k = cfg.k if cfg.k is not None else kscan.best_silhouette_k()
    sol = kscan.solutions.get(k) or kmeans(Z, k, cfg.n_init, cfg.seed)
    stab = jaccard_stability(Z, k, cfg.runs, cfg.seed, cfg.stability_n_init,
                             cfg.rare_threshold, cfg.stable_threshold)
    table = contingency(m.class_labels, sol.labels)
    chi = chi_square_independence(table.counts)
    modal = table.modal_capture()
    summary = {
        "k": k,
        "silhouette": {str(r.k): r.silhouette for r in kscan.rows},
        "chi2": chi.chi2,
        "dof": chi.dof,
        "p_value": chi.p_value,
        "p_underflow": chi.p_underflow,
        "cramers_v": chi.cramers_v,
        "cramers_v_full": chi.cramers_v_full,
        "modal_capture": modal,
        "min_modal_capture": min(modal.values()),
        "ae_best_val_mse": emb.history.best_val_mse,
    }
    return PanResult(emb, kscan, k, sol, stab, table, chi, m.class_labels, summary)
