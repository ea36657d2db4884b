# src/data_loaders/__init__.py
"""
Dataset ingestion and feature preparation

This package handles:
- data_loader: affinity TSVs, K_d → pK_d, seeded k-fold splits, PairDataset
- embedding_store: per-protein embedding and contact files (plus stubs)
- protein_features / feature_cache: residue features, contact graphs and the on-disk cache
- desk_corpus: small synthetic datasets for smoke runs
"""

from .data_loader import AffinityRecord, FoldSplit, PairDataset, kfold_split, load_dataset

__all__ = [
    'AffinityRecord',
    'FoldSplit',
    'PairDataset',
    'kfold_split',
    'load_dataset',
]
