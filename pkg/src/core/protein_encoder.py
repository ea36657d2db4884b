# src/core/protein_encoder.py
import logging
from dataclasses import dataclass

import numpy as np

from .batch import DenseLayout, ProtBatch
from .config import TrainConfig
from .drug_encoder import PathFusion
from .layers import Linear, Module
from .mincut import ClusterHierarchy, ClusterStack
from .pna import PNAStack
from .ssm import SelectiveSSM
from .tensor import Tensor, concat, gather, reshape

logger = logging.getLogger(__name__)

ONEHOT_DIM = 21
PHYSCHEM_DIM = 12


@dataclass
class ProteinOutput:
    residues: Tensor           # R×d, residue order
    dense: Tensor              # B×V×d, residue order, zero padding
    mask: np.ndarray           # B×V
    hierarchy: ClusterHierarchy


def to_dense(rows: Tensor, layout: DenseLayout) -> Tensor:
    """Scatter ragged rows into B×L×d slots (padding rows are zero)"""
    padded = concat([rows, Tensor(np.zeros((1, rows.shape[1])))], axis=0)
    return gather(padded, layout.index)


def from_dense(dense: Tensor, layout: DenseLayout) -> Tensor:
    """Inverse of to_dense: valid slots back to rows in their original ids"""
    return gather(reshape(dense, (-1, dense.shape[-1])), layout.flat_pos)


class ResidueProjection(Module):
    """[esm ‖ one-hot ‖ z-scored physchem] → d"""

    def __init__(self, esm_dim: int, dim: int, rng: np.random.Generator):
        self.linear = Linear(esm_dim + ONEHOT_DIM + PHYSCHEM_DIM, dim, rng)
        self.register_buffer("physchem_mean", np.zeros(PHYSCHEM_DIM))
        self.register_buffer("physchem_std", np.ones(PHYSCHEM_DIM))

    def set_physchem_statistics(self, mean: np.ndarray, std: np.ndarray) -> None:
        std = np.where(np.asarray(std) > 0, std, 1.0)
        self.register_buffer("physchem_mean", mean)
        self.register_buffer("physchem_std", std)

    def forward(self, batch: ProtBatch) -> Tensor:
        physchem = (batch.physchem - self.buffer("physchem_mean")) / self.buffer("physchem_std")
        return self.linear(Tensor(np.concatenate([batch.esm, batch.onehot, physchem], axis=1)))


class ProteinEncoder(Module):
    def __init__(self, config: TrainConfig, rng: np.random.Generator):
        d = config.hidden_channels
        ablation = config.ablation
        self.dim = d
        self.project = ResidueProjection(config.esm_dim, d, rng)
        self.ssm = SelectiveSSM(d, config.ssm_state, rng) if ablation.prot_uses_global else None
        self.pna = PNAStack(d, config.rbf_centers, config.total_layer, rng) if ablation.prot_uses_local else None
        self.fuse = PathFusion(d, rng)
        self.clusters = ClusterStack(d, config.cluster_sizes, rng)

    def sequence_context(self, x: Tensor, batch: ProtBatch) -> Tensor:
        """degree sort → dense → selective scan → unsort"""
        layout = batch.sorted_layout
        return from_dense(self.ssm(to_dense(x, layout), layout.mask), layout)

    def forward(self, batch: ProtBatch) -> ProteinOutput:
        x = self.project(batch)
        zeros = Tensor(np.zeros((batch.num_residues, self.dim)))
        r_seq = self.sequence_context(x, batch) if self.ssm is not None else zeros
        r_graph = self.pna(x, batch.edge_src, batch.edge_dst, batch.edge_attr) if self.pna is not None else zeros
        residues = self.fuse(r_graph, r_seq)
        dense = to_dense(residues, batch.layout)
        hierarchy = self.clusters(dense, batch.adjacency, batch.layout.mask)
        return ProteinOutput(residues=residues, dense=dense, mask=batch.layout.mask, hierarchy=hierarchy)
