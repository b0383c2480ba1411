"""log1p -> highly-variable-gene selection -> per-gene z-scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_ingest import ExpressionMatrix
from .errors import NegativeInput, NoVariableGenes, ZeroVarianceColumn

# Population variance (divide by n) unless a caller overrides it.
DEFAULT_DDOF = 0


@dataclass(frozen=True)
class ScaledMatrix:
    sample_ids: tuple[str, ...]
    gene_ids: tuple[str, ...]
    values: np.ndarray
    per_gene_mean: np.ndarray
    per_gene_std: np.ndarray
    ddof: int = DEFAULT_DDOF

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z) * self.per_gene_std + self.per_gene_mean

    def sidecar(self) -> dict:
        return {
            "selected_genes": list(self.gene_ids),
            "means": self.per_gene_mean.tolist(),
            "stds": self.per_gene_std.tolist(),
            "ddof": self.ddof,
        }


def log1p_transform(m: ExpressionMatrix) -> ExpressionMatrix:
    if np.any(m.values < 0):
        raise NegativeInput("log1p_transform requires non-negative values")
    return m.with_values(np.log1p(m.values))


def gene_variances(values: np.ndarray, ddof: int = DEFAULT_DDOF) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if n - ddof <= 0:
        raise ZeroVarianceColumn(f"need more than {ddof} samples to compute variance")
    centered = values - values.mean(axis=0)
    return np.einsum("ij,ij->j", centered, centered) / (n - ddof)


def select_hvg(m: ExpressionMatrix, top_n: int, ddof: int = DEFAULT_DDOF) -> ExpressionMatrix:
    """Keep the ``top_n`` highest-variance genes, in variance-descending order.

    Zero-variance genes are never kept, so fewer than ``top_n`` genes may come
    back. Equal variances are ordered by original column index.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    var = gene_variances(m.values, ddof)
    positive = np.flatnonzero(var > 0)
    if positive.size == 0:
        raise NoVariableGenes("every gene is constant across samples")
    # lexsort: last key is primary
    order = positive[np.lexsort((positive, -var[positive]))]
    keep = order[:top_n]
    return m.with_values(m.values[:, keep], [m.gene_ids[j] for j in keep])


def standardize(m: ExpressionMatrix, ddof: int = DEFAULT_DDOF) -> ScaledMatrix:
    values = np.asarray(m.values, dtype=np.float64)
    mean = values.mean(axis=0)
    std = np.sqrt(gene_variances(values, ddof))
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        raise ZeroVarianceColumn(f"gene {m.gene_ids[bad[0]]!r} has zero variance")
    z = (values - mean) / std
    z.setflags(write=False)
    return ScaledMatrix(m.sample_ids, m.gene_ids, z, mean, std, ddof)


def preprocess(m: ExpressionMatrix, top_n: int = 2000, ddof: int = DEFAULT_DDOF) -> ScaledMatrix:
    return standardize(select_hvg(log1p_transform(m), top_n, ddof), ddof)
