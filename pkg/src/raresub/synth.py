"""Seeded synthetic cohorts with planted tissue blocks and a planted rare subtype.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014) used as a counter
generator, so any language with 64-bit unsigned arithmetic reproduces the
matrices exactly::

    state_i = seed + i * 0x9E3779B97F4A7C15            (mod 2**64, i = 1, 2, ...)
    z = (state_i ^ (state_i >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out_i = z ^ (z >> 31)

Uniforms are ``(out >> 11) * 2**-53``. Normals use Box-Muller on consecutive
pairs ``(u1, u2)`` with ``u1`` shifted into (0, 1]: ``sqrt(-2 ln u1) cos(2 pi u2)``.
Random orderings are the stable argsort of a uniform vector.

Generation order (each step consumes draws from one shared stream):

1. background cluster of each sample: ``i mod B`` permuted by a random ordering;
2. rare members: the first ``round(rare_fraction * n)`` samples of cluster 0
   under a random ordering of that cluster's members;
3. gene roles: a random ordering of genes; the first ``n_marker_genes`` are
   markers (first half up, second half down), the next ``B * block`` are
   background blocks;
4. per-gene baseline log-level, uniform in ``[baseline_low, baseline_high)``;
5. i.i.d. Gaussian noise, row-major, scaled by ``noise_sigma``.

The log-space signal ``v`` is emitted as ``max(expm1(v), 0)`` so log1p
recovers it wherever ``v >= 0``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data_ingest import ExpressionMatrix, save_matrix
from .errors import InfeasibleSpec

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = np.uint64(seed % 2**64)
        self.counter = 0

    def next_u64(self, size: int) -> np.ndarray:
        i = np.arange(self.counter + 1, self.counter + size + 1, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            z = self.state + i * _GAMMA
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))

    def uniform(self, size: int) -> np.ndarray:
        return (self.next_u64(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, size: int) -> np.ndarray:
        u = self.uniform(2 * size).reshape(size, 2)
        u1 = 1.0 - u[:, 0]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u[:, 1])

    def ordering(self, size: int) -> np.ndarray:
        return np.argsort(self.uniform(size), kind="stable")


@dataclass
class SyntheticSpec:
    n_samples: int = 150
    n_genes: int = 2000
    n_background_clusters: int = 3
    rare_fraction: float = 0.07
    n_marker_genes: int = 60
    effect_size: float = 3.0
    noise_sigma: float = 0.5
    seed: int = 1
    background_genes_per_cluster: int = 300
    background_shift: float = 1.0
    baseline_low: float = 3.0
    baseline_high: float = 7.0

    @property
    def n_rare(self) -> int:
        return int(round(self.rare_fraction * self.n_samples))

    def validate(self) -> None:
        if not 0 < self.rare_fraction <= 0.1:
            raise InfeasibleSpec("rare_fraction must lie in (0, 0.1]")
        if self.n_rare < 3:
            raise InfeasibleSpec(f"rare cluster would have {self.n_rare} < 3 members")
        if self.n_background_clusters < 1:
            raise InfeasibleSpec("need at least one background cluster")
        size0 = len(range(0, self.n_samples, self.n_background_clusters))
        if self.n_rare > size0:
            raise InfeasibleSpec("rare cluster larger than its host background cluster")
        used = self.n_marker_genes + self.n_background_clusters * self.background_genes_per_cluster
        if used > self.n_genes:
            raise InfeasibleSpec(f"marker + background genes ({used}) exceed n_genes")
        if self.n_marker_genes < 0 or self.noise_sigma < 0 or self.effect_size < 0:
            raise InfeasibleSpec("marker count, noise and effect size must be non-negative")


@dataclass
class SyntheticCohort:
    matrix: ExpressionMatrix
    ground_truth: np.ndarray  # background cluster, or n_background_clusters for rare members
    member_ids: list[str]
    marker_gene_ids: list[str]
    up_gene_ids: list[str]
    down_gene_ids: list[str]
    signal: np.ndarray  # log-space signal before noise
    spec: SyntheticSpec

    def ground_truth_json(self) -> dict:
        return {
            "member_ids": self.member_ids,
            "marker_gene_ids": self.marker_gene_ids,
            "up_gene_ids": self.up_gene_ids,
            "down_gene_ids": self.down_gene_ids,
            "spec": asdict(self.spec),
        }

    def write(self, directory, class_name: str = "SYN") -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "data": directory / "data.csv",
            "labels": directory / "labels.csv",
            "truth": directory / "ground_truth.json",
        }
        m = self.matrix
        labelled = ExpressionMatrix(m.sample_ids, m.gene_ids, m.values, [class_name] * m.shape[0])
        save_matrix(labelled, paths["data"], paths["labels"])
        paths["truth"].write_text(json.dumps(self.ground_truth_json(), indent=2))
        return paths


def generate(spec: SyntheticSpec) -> SyntheticCohort:
    spec.validate()
    n, G, B = spec.n_samples, spec.n_genes, spec.n_background_clusters
    rng = SplitMix64(spec.seed)

    background = np.arange(n) % B
    background = background[rng.ordering(n)]

    host = np.flatnonzero(background == 0)
    rare = np.sort(host[rng.ordering(host.size)[: spec.n_rare]])

    genes = rng.ordering(G)
    markers = genes[: spec.n_marker_genes]
    half = spec.n_marker_genes // 2
    up, down = markers[:half], markers[half:]
    block = spec.background_genes_per_cluster
    blocks = [genes[spec.n_marker_genes + b * block: spec.n_marker_genes + (b + 1) * block] for b in range(B)]

    baseline = spec.baseline_low + (spec.baseline_high - spec.baseline_low) * rng.uniform(G)
    signal = np.tile(baseline, (n, 1))
    for b in range(B):
        rows = np.flatnonzero(background == b)
        signal[np.ix_(rows, blocks[b])] += spec.background_shift
    signal[np.ix_(rare, up)] += spec.effect_size
    signal[np.ix_(rare, down)] -= spec.effect_size

    noise = rng.normal(n * G).reshape(n, G) * spec.noise_sigma
    values = np.maximum(np.expm1(signal + noise), 0.0)

    sample_ids = [f"sample_{i}" for i in range(n)]
    gene_ids = [f"gene_{j}" for j in range(G)]
    truth = background.copy()
    truth[rare] = B
    return SyntheticCohort(
        matrix=ExpressionMatrix(sample_ids, gene_ids, values),
        ground_truth=truth,
        member_ids=[sample_ids[i] for i in rare],
        marker_gene_ids=[gene_ids[j] for j in markers],
        up_gene_ids=[gene_ids[j] for j in up],
        down_gene_ids=[gene_ids[j] for j in down],
        signal=signal,
        spec=spec,
    )
