# src/core/mincut.py
"""
Hierarchical residue clustering: a two-layer GCN produces soft assignments
M (masked softmax over clusters), and dense mincut pooling coarsens the
features and adjacency while yielding the cut and orthogonality losses.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np

from .layers import Linear, Module
from .tensor import Tensor, as_tensor, relu, softmax, sqrt, swap_last

logger = logging.getLogger(__name__)

EPS = 1e-15


@dataclass
class PoolLevel:
    assignment: Tensor     # B×n×cl, zero rows at padding
    features: Tensor       # B×cl×d
    adjacency: Tensor      # B×cl×cl, renormalised
    cut_loss: Tensor       # scalar
    ortho_loss: Tensor     # scalar


@dataclass
class ClusterHierarchy:
    levels: List[PoolLevel] = field(default_factory=list)

    @property
    def aux_loss(self) -> Tensor:
        total = as_tensor(0.0)
        for level in self.levels:
            total = total + level.cut_loss + level.ortho_loss
        return total

    @property
    def final(self) -> PoolLevel:
        return self.levels[-1]

    def composed_assignment(self) -> Tensor:
        """M¹M²…: residues → final clusters"""
        chain = self.levels[0].assignment
        for level in self.levels[1:]:
            chain = chain @ level.assignment
        return chain


def normalized_adjacency(adjacency: Union[Tensor, np.ndarray]) -> Tensor:
    """D̃^{-1/2}(A + I)D̃^{-1/2} over the last two axes"""
    adjacency = as_tensor(adjacency)
    n = adjacency.shape[-1]
    with_loops = adjacency + np.eye(n)
    inv = 1.0 / sqrt(with_loops.sum(axis=-1, keepdims=True))
    return with_loops * inv * swap_last(inv)


def mincut_losses(assignment: Tensor, adjacency: Union[Tensor, np.ndarray]):
    """(L_cut, L_ortho) averaged over the batch; L_cut is 0 for an edgeless graph"""
    adjacency = as_tensor(adjacency)
    m = assignment
    cl = m.shape[-1]
    cut_num = ((adjacency @ m) * m).sum(axis=(-1, -2))
    degree = adjacency.sum(axis=-1, keepdims=True)
    cut_den = (degree * m * m).sum(axis=(-1, -2))
    safe = (cut_den.data > 0).astype(np.float64)
    # edgeless graphs contribute 0; the shifted denominator only avoids 0/0
    ratio = cut_num / (cut_den + (1.0 - safe)) * safe
    cut_loss = -ratio.mean()

    gram = swap_last(m) @ m
    gram_norm = sqrt((gram * gram).sum(axis=(-1, -2), keepdims=True))
    diff = gram / gram_norm - np.eye(cl) / np.sqrt(cl)
    ortho_loss = sqrt((diff * diff).sum(axis=(-1, -2))).mean()
    return cut_loss, ortho_loss


def pool(features: Tensor, adjacency: Union[Tensor, np.ndarray], assignment: Tensor):
    """X' = MᵀX, A' = MᵀAM with the diagonal removed and symmetric degree scaling"""
    adjacency = as_tensor(adjacency)
    mt = swap_last(assignment)
    pooled_x = mt @ features
    pooled_a = mt @ adjacency @ assignment
    cl = assignment.shape[-1]
    pooled_a = pooled_a * (1.0 - np.eye(cl))
    scale = sqrt(pooled_a.sum(axis=-1, keepdims=True)) + EPS
    pooled_a = pooled_a / scale / swap_last(scale)
    return pooled_x, pooled_a


class MinCutLevel(Module):
    """Two GCN layers then cluster logits; pools to `clusters` nodes"""

    def __init__(self, dim: int, clusters: int, rng: np.random.Generator):
        self.clusters = clusters
        self.gcn1 = Linear(dim, dim, rng)
        self.gcn2 = Linear(dim, dim, rng)
        self.assign = Linear(dim, clusters, rng)

    def forward(self, x: Tensor, adjacency: Union[Tensor, np.ndarray], mask: np.ndarray) -> PoolLevel:
        valid = mask.astype(np.float64)[..., None]
        a_hat = normalized_adjacency(adjacency)
        h = relu(a_hat @ self.gcn1(x)) * valid
        h = relu(a_hat @ self.gcn2(h)) * valid
        assignment = softmax(self.assign(h), axis=-1, mask=mask[..., None])
        cut_loss, ortho_loss = mincut_losses(assignment, adjacency)
        pooled_x, pooled_a = pool(h, adjacency, assignment)
        return PoolLevel(assignment=assignment, features=pooled_x, adjacency=pooled_a,
                         cut_loss=cut_loss, ortho_loss=ortho_loss)


class ClusterStack(Module):
    def __init__(self, dim: int, cluster_sizes: Sequence[int], rng: np.random.Generator):
        self.levels = [MinCutLevel(dim, c, rng) for c in cluster_sizes]

    def forward(self, x: Tensor, adjacency: np.ndarray, mask: np.ndarray) -> ClusterHierarchy:
        hierarchy = ClusterHierarchy()
        features, adj, valid = x, adjacency, mask
        for level in self.levels:
            result = level(features, adj, valid)
            hierarchy.levels.append(result)
            features, adj = result.features, result.adjacency
            valid = np.ones(features.shape[:2], dtype=bool)
        return hierarchy
