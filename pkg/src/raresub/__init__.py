"""Rare-subtype discovery in expression cohorts.

Autoencoder embedding of highly variable genes, k-means model selection with
seed-stability analysis, and cluster-vs-rest differential expression.
"""

__version__ = "0.1.0"
