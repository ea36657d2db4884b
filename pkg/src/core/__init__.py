# src/core/__init__.py
"""
Model and training core

- tensor, optim, rng, checkpoint: the autodiff engine and its runtime
- layers, pna, ssm, mincut: building blocks
- drug_encoder, protein_encoder, fusion, predictor, model: HiF-DTA itself
- trainer, metrics, fold_statistics, gradcheck: training and evaluation

Only the leaf modules are re-exported here; import the rest by module path.
"""

from .config import Ablation, TrainConfig, load_config, parse_ablation, save_config
from .errors import HifdtaError, UsageError

__all__ = [
    'Ablation',
    'TrainConfig',
    'load_config',
    'parse_ablation',
    'save_config',
    'HifdtaError',
    'UsageError',
]
