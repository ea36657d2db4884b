# src/core/predictor.py
import logging

import numpy as np

from .batch import DrugBatch
from .config import TrainConfig
from .layers import Linear, MLP, Module
from .rng import SeededRng
from .tensor import Tensor, concat, gather, reshape, segment_softmax, segment_sum, softmax, swap_last

logger = logging.getLogger(__name__)


class ProteinPool(Module):
    """Cluster scores pushed back to residues through the composed assignments"""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.scorer = Linear(dim, 1, rng)
        self.mlp = MLP([dim, dim, dim], rng)

    def attention(self, clusters: Tensor, chain: Tensor, mask: np.ndarray) -> Tensor:
        scores = chain @ self.scorer(clusters)                              # B×V×1
        return softmax(scores, axis=1, mask=mask[..., None])

    def forward(self, clusters: Tensor, chain: Tensor, residues: Tensor, mask: np.ndarray):
        weights = self.attention(clusters, chain, mask)
        pooled = (swap_last(weights) @ residues)                             # B×1×d
        return self.mlp(reshape(pooled, (pooled.shape[0], pooled.shape[2]))), weights


class DrugPool(Module):
    """Atom attention driven by the atom, its first cluster and its molecule"""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.scorer = MLP([3 * dim, dim, 1], rng)
        self.mlp = MLP([dim, dim, dim], rng)

    def attention(self, atoms: Tensor, clusters: Tensor, molecules: Tensor, batch: DrugBatch) -> Tensor:
        context = concat([atoms, gather(clusters, batch.first_cluster), gather(molecules, batch.atom_batch)], axis=1)
        return segment_softmax(self.scorer(context), batch.atom_batch, batch.num_molecules)

    def forward(self, atoms: Tensor, clusters: Tensor, molecules: Tensor, batch: DrugBatch):
        weights = self.attention(atoms, clusters, molecules, batch)
        pooled = segment_sum(atoms * weights, batch.atom_batch, batch.num_molecules)
        return self.mlp(pooled), weights


class AffinityHead(Module):
    """MLP 2d → d → d/2 → 1 with dropout, no output activation"""

    def __init__(self, config: TrainConfig, rng: np.random.Generator, seeded: SeededRng):
        d = config.hidden_channels
        self.mlp = MLP([2 * d, d, d // 2, 1], rng, dropout_p=config.dropout, seeded=seeded, stream="head")

    def forward(self, protein: Tensor, drug: Tensor) -> Tensor:
        out = self.mlp(concat([protein, drug], axis=1))
        return reshape(out, (out.shape[0],))
