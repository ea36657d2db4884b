# src/core/drug_encoder.py
"""
Drug side: atom, substructure and molecule representations.

Atoms are embedded by a two-layer projection, then read by a global
pathway (BiLSTM over SMILES order) and a local pathway (PNA over bonds).
The fused atom features are mean-pooled into junction-tree clusters,
updated with a cluster-type embedding, and attention-pooled per molecule.
"""

import logging
from dataclasses import dataclass

import numpy as np

from chem.featurizer import ATOM_FEATURE_DIM, BOND_FEATURE_DIM

from .batch import DrugBatch
from .config import TrainConfig
from .errors import DimensionError
from .layers import BiLSTM, Dropout, Embedding, LayerNorm, Linear, MLP, Module
from .pna import PNAStack
from .rng import SeededRng
from .tensor import Tensor, concat, gather, relu, reshape, segment_mean, segment_softmax, segment_sum

logger = logging.getLogger(__name__)


@dataclass
class DrugScales:
    atoms: Tensor          # N×d
    clusters: Tensor       # C×d
    molecules: Tensor      # B×d
    attention: Tensor      # C×h cluster weights


class AtomEmbedding(Module):
    """Norm(ReLU(ReLU(x W1 + b1) W2 + b2))"""

    def __init__(self, in_dim: int, dim: int, rng: np.random.Generator):
        self.in_dim = in_dim
        self.fc1 = Linear(in_dim, dim, rng)
        self.fc2 = Linear(dim, dim, rng)
        self.norm = LayerNorm(dim)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise DimensionError("embed_atoms", x.shape, (self.in_dim,))
        return self.norm(relu(self.fc2(relu(self.fc1(x)))))


class PathFusion(Module):
    """Norm(ReLU(W [a ‖ b] + bias)), used for both atoms and residues"""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.linear = Linear(2 * dim, dim, rng)
        self.norm = LayerNorm(dim)

    def forward(self, local: Tensor, global_: Tensor) -> Tensor:
        if local.shape != global_.shape:
            raise DimensionError("fuse_paths", local.shape, global_.shape)
        return self.norm(relu(self.linear(concat([local, global_], axis=1))))


class SubstructureAttention(Module):
    """Per-head cluster scoring, dropout, per-molecule softmax and weighted sum"""

    def __init__(self, dim: int, heads: int, dropout: float, rng: np.random.Generator, seeded: SeededRng):
        self.heads = heads
        self.head_dim = dim // heads
        self.scorers = [MLP([self.head_dim, self.head_dim, 1], rng) for _ in range(heads)]
        self.drop = Dropout(dropout, seeded, "drug.attention")

    def forward(self, clusters: Tensor, cluster_batch: np.ndarray, num_molecules: int):
        count = clusters.shape[0]
        parts = reshape(clusters, (count, self.heads, self.head_dim))
        scores = concat([scorer(parts[:, k, :]) for k, scorer in enumerate(self.scorers)], axis=1)
        weights = segment_softmax(self.drop(scores), cluster_batch, num_molecules)
        weighted = parts * reshape(weights, (count, self.heads, 1))
        pooled = segment_sum(weighted, cluster_batch, num_molecules)
        return weights, reshape(pooled, (num_molecules, self.heads * self.head_dim))


class DrugEncoder(Module):
    def __init__(self, config: TrainConfig, rng: np.random.Generator, seeded: SeededRng):
        d = config.hidden_channels
        ablation = config.ablation
        self.dim = d
        self.embed = AtomEmbedding(ATOM_FEATURE_DIM, d, rng)
        self.bilstm = BiLSTM(d, d // 2, rng) if ablation.drug_uses_global else None
        self.pna = PNAStack(d, BOND_FEATURE_DIM, config.total_layer, rng) if ablation.drug_uses_local else None
        self.fuse = PathFusion(d, rng)
        self.sub_linear = Linear(d, d, rng, bias=False)
        self.cluster_embedding = Embedding(config.vocab_size, d, rng)
        self.attention = SubstructureAttention(d, config.drug_heads, config.dropout, rng, seeded)

    # --- steps, exposed for tests ---
    def sequence_context(self, x: Tensor, batch: DrugBatch) -> Tensor:
        fwd, bwd = self.bilstm(x, batch.atoms.index, batch.atoms_reversed.index, batch.atoms.mask)
        width = fwd.shape[-1]
        flat_f = reshape(fwd, (-1, width))
        flat_b = reshape(bwd, (-1, width))
        return concat([gather(flat_f, batch.atoms.flat_pos), gather(flat_b, batch.atoms_reversed.flat_pos)], axis=1)

    def pool_substructures(self, atoms: Tensor, batch: DrugBatch) -> Tensor:
        members = gather(atoms, batch.member_atoms)
        return segment_mean(members, batch.member_clusters, batch.num_clusters)

    def update_substructures(self, pooled: Tensor, cluster_types: np.ndarray) -> Tensor:
        return self.cluster_embedding(cluster_types) + relu(self.sub_linear(pooled))

    def forward(self, batch: DrugBatch) -> DrugScales:
        zeros = Tensor(np.zeros((batch.num_atoms, self.dim)))
        x = self.embed(Tensor(batch.atom_x))
        h_seq = self.sequence_context(x, batch) if self.bilstm is not None else zeros
        h_graph = self.pna(x, batch.edge_src, batch.edge_dst, batch.edge_attr) if self.pna is not None else zeros
        atoms = self.fuse(h_graph, h_seq)
        clusters = self.update_substructures(self.pool_substructures(atoms, batch), batch.cluster_types)
        weights, molecules = self.attention(clusters, batch.cluster_batch, batch.num_molecules)
        return DrugScales(atoms=atoms, clusters=clusters, molecules=molecules, attention=weights)
