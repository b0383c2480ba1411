"""Loading, validating, joining and subsetting expression matrices."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DuplicateGeneId,
    DuplicateSampleId,
    EmptyJoin,
    InvalidValues,
    MalformedHeader,
    MissingFile,
    NonNumericCell,
    ShapeMismatch,
    UnknownClass,
)

log = logging.getLogger(__name__)

ID_HEADERS = ("", "id")
CLASS_COLUMN = "Class"


@dataclass(frozen=True)
class ExpressionMatrix:
    """Samples x genes matrix keyed by sample and gene identifiers.

    ``values`` is stored as a read-only float64 array. Non-negativity is only
    enforced by :func:`load_matrix`; constructing a matrix directly lets
    callers build transformed (e.g. z-scored) or deliberately invalid data.
    """

    sample_ids: tuple[str, ...]
    gene_ids: tuple[str, ...]
    values: np.ndarray
    class_labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ShapeMismatch(f"values must be 2-D, got shape {values.shape}")
        sample_ids = tuple(str(s) for s in self.sample_ids)
        gene_ids = tuple(str(g) for g in self.gene_ids)
        if values.shape != (len(sample_ids), len(gene_ids)):
            raise ShapeMismatch(
                f"values shape {values.shape} does not match "
                f"{len(sample_ids)} samples x {len(gene_ids)} genes"
            )
        _check_unique(sample_ids, DuplicateSampleId, "sample")
        _check_unique(gene_ids, DuplicateGeneId, "gene")
        labels = self.class_labels
        if labels is not None:
            labels = tuple(str(c) for c in labels)
            if len(labels) != len(sample_ids):
                raise ShapeMismatch("class_labels must align with sample_ids")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", sample_ids)
        object.__setattr__(self, "gene_ids", gene_ids)
        object.__setattr__(self, "class_labels", labels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values: np.ndarray, gene_ids: Optional[Sequence[str]] = None):
        return ExpressionMatrix(
            self.sample_ids,
            self.gene_ids if gene_ids is None else tuple(gene_ids),
            values,
            self.class_labels,
        )

    def class_counts(self) -> dict[str, int]:
        if self.class_labels is None:
            return {}
        return dict(sorted(Counter(self.class_labels).items()))


@dataclass(frozen=True)
class CohortFilter:
    class_name: str


@dataclass
class ValidationSummary:
    nan_count: int = 0
    inf_count: int = 0
    negative_count: int = 0

    @property
    def ok(self) -> bool:
        return self.nan_count == 0 and self.inf_count == 0 and self.negative_count == 0

    def as_dict(self) -> dict:
        return {
            "nan_count": self.nan_count,
            "inf_count": self.inf_count,
            "negative_count": self.negative_count,
        }


@dataclass
class LoadReport:
    n_samples: int
    n_genes: int
    class_counts: dict[str, int]
    violations: dict
    dropped_data_only: int = 0
    dropped_labels_only: int = 0
    files: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_genes": self.n_genes,
            "class_counts": self.class_counts,
            "violations": self.violations,
            "dropped_data_only": self.dropped_data_only,
            "dropped_labels_only": self.dropped_labels_only,
            "files": self.files,
        }


def _check_unique(ids, exc, what):
    if len(set(ids)) != len(ids):
        dupes = sorted(k for k, v in Counter(ids).items() if v > 1)
        raise exc(f"duplicate {what} ids: {dupes[:5]}")


def _read_header(path: Path) -> list[str]:
    with open(path, newline="") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise MalformedHeader(f"{path}: empty file") from None
    if not header:
        raise MalformedHeader(f"{path}: empty header row")
    if header[0].strip().lower() not in ID_HEADERS:
        raise MalformedHeader(
            f"{path}: first header cell must be empty or 'id', got {header[0]!r}"
        )
    return header


def _require(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    return path


def validate(m: ExpressionMatrix) -> ValidationSummary:
    v = m.values
    return ValidationSummary(
        nan_count=int(np.isnan(v).sum()),
        inf_count=int(np.isinf(v).sum()),
        negative_count=int((v < 0).sum()),
    )


def read_data_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    path = _require(path)
    header = _read_header(path)
    genes = header[1:]
    if not genes:
        raise MalformedHeader(f"{path}: no gene columns")
    _check_unique(genes, DuplicateGeneId, "gene")
    df = pd.read_csv(
        path, index_col=0, dtype={0: str}, float_precision="round_trip", keep_default_na=False,
        na_values=["NaN", "nan", "NA"],
    )
    if df.shape[1] != len(genes):
        raise MalformedHeader(f"{path}: rows have inconsistent field counts")
    for j, dtype in enumerate(df.dtypes):
        if dtype.kind not in "fiu":
            col = df.iloc[:, j]
            numeric = pd.to_numeric(col, errors="coerce")
            bad = numeric.isna() & ~col.astype(str).isin(["NaN", "nan", "NA"])
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise NonNumericCell(str(df.index[i]), genes[j], col.iloc[i])
    samples = [str(s) for s in df.index]
    _check_unique(samples, DuplicateSampleId, "sample")
    return samples, genes, df.to_numpy(dtype=np.float64)


def read_labels_csv(path) -> dict[str, str]:
    path = _require(path)
    header = _read_header(path)
    if CLASS_COLUMN not in header[1:]:
        raise MalformedHeader(f"{path}: no {CLASS_COLUMN!r} column")
    col = header.index(CLASS_COLUMN)
    labels: dict[str, str] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedHeader(f"{path}: row {row[0]!r} has {len(row)} fields")
            if row[0] in labels:
                raise DuplicateSampleId(f"{path}: duplicate sample id {row[0]!r}")
            labels[row[0]] = row[col]
    return labels


def load_matrix(data_path, labels_path, return_report: bool = False):
    """Inner-join the data and label files on sample ID.

    Output rows follow the data file's order. Values must be finite and
    non-negative; anything else raises :class:`InvalidValues` (no imputation).
    """
    samples, genes, values = read_data_csv(data_path)
    labels = read_labels_csv(labels_path)
    keep = [i for i, s in enumerate(samples) if s in labels]
    if not keep:
        raise EmptyJoin(f"no sample ids shared between {data_path} and {labels_path}")
    dropped_data = len(samples) - len(keep)
    sample_set = set(samples)
    dropped_labels = sum(1 for s in labels if s not in sample_set)
    if dropped_data or dropped_labels:
        log.info(
            "inner join dropped %d data-only and %d label-only samples",
            dropped_data, dropped_labels,
        )
    kept = [samples[i] for i in keep]
    m = ExpressionMatrix(kept, genes, values[keep], [labels[s] for s in kept])
    summary = validate(m)
    if not summary.ok:
        raise InvalidValues(f"matrix violates finite/non-negative contract: {summary.as_dict()}")
    if not return_report:
        return m
    report = LoadReport(
        n_samples=m.shape[0],
        n_genes=m.shape[1],
        class_counts=m.class_counts(),
        violations=summary.as_dict(),
        dropped_data_only=dropped_data,
        dropped_labels_only=dropped_labels,
        files={"data": str(data_path), "labels": str(labels_path)},
    )
    return m, report


def filter_class(m: ExpressionMatrix, f: CohortFilter | str) -> ExpressionMatrix:
    name = f.class_name if isinstance(f, CohortFilter) else str(f)
    if m.class_labels is None:
        raise UnknownClass("matrix has no class labels")
    rows = [i for i, c in enumerate(m.class_labels) if c == name]
    if not rows:
        raise UnknownClass(f"class {name!r} matches no samples")
    return ExpressionMatrix(
        [m.sample_ids[i] for i in rows],
        m.gene_ids,
        m.values[rows],
        [m.class_labels[i] for i in rows],
    )


def save_matrix(m: ExpressionMatrix, data_path, labels_path=None) -> None:
    """Write the CSV pair in the UCI layout (unnamed ID column, 17 sig. digits)."""
    df = pd.DataFrame(m.values, index=list(m.sample_ids), columns=list(m.gene_ids))
    df.to_csv(data_path, float_format="%.17g", index_label="")
    if labels_path is not None:
        if m.class_labels is None:
            raise UnknownClass("matrix has no class labels to save")
        pd.DataFrame({CLASS_COLUMN: list(m.class_labels)}, index=list(m.sample_ids)).to_csv(
            labels_path, index_label=""
        )
