# src/core/fusion.py
"""
Multi-head low-rank bilinear cross-attention between drug scales and the
final residue clusters, with residual updates on both sides.

For head h, S[h, v, r] = <(v W_v^h) ⊙ w^h, r W_r^h> + b^h. Residue clusters
aggregate drug rows with weights normalised over v; drug rows aggregate
clusters with weights normalised over r. Heads are averaged.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .config import TrainConfig
from .layers import Linear, Module, Parameter
from .tensor import Tensor, concat, index, reshape, softmax, swap_last, transpose

logger = logging.getLogger(__name__)


@dataclass
class ScaleAttention:
    residues: Tensor   # r̃, B×Nr×d
    drug: Tensor       # ṽ, B×Nv×d
    alpha: Tensor      # B×h×Nv×Nr, normalised over v
    beta: Tensor       # B×h×Nv×Nr, normalised over r


class BilinearAttention(Module):
    def __init__(self, dim: int, heads: int, k: int, rng: np.random.Generator):
        self.dim, self.heads, self.k = dim, heads, k
        width = dim * k
        self.w_v = Linear(dim, heads * width, rng, bias=False)
        self.w_r = Linear(dim, heads * width, rng, bias=False)
        self.channel = Parameter(rng.normal(0.0, 1.0 / np.sqrt(width), size=(heads, 1, width)))
        self.bias = Parameter(np.zeros((heads, 1, 1)))

    def scores(self, v: Tensor, r: Tensor) -> Tensor:
        batch, nv, _ = v.shape
        nr = r.shape[1]
        width = self.dim * self.k
        vh = transpose(reshape(self.w_v(v), (batch, nv, self.heads, width)), (0, 2, 1, 3))
        rh = transpose(reshape(self.w_r(r), (batch, nr, self.heads, width)), (0, 2, 3, 1))
        return (vh * self.channel) @ rh + self.bias

    def forward(self, v: Tensor, v_mask: np.ndarray, r: Tensor, r_mask: np.ndarray) -> ScaleAttention:
        pair_mask = (v_mask[:, None, :, None] & r_mask[:, None, None, :])
        s = self.scores(v, r)
        alpha = softmax(s, axis=2, mask=pair_mask)
        beta = softmax(s, axis=3, mask=pair_mask)
        batch, nv, d = v.shape
        nr = r.shape[1]
        v4 = reshape(v, (batch, 1, nv, d))
        r4 = reshape(r, (batch, 1, nr, d))
        r_new = r + (swap_last(alpha) @ v4).mean(axis=1)
        v_new = v + (beta @ r4).mean(axis=1)
        return ScaleAttention(residues=r_new, drug=v_new, alpha=alpha, beta=beta)


class MultiScaleFusion(Module):
    """One bilinear block per enabled drug scale, combined by gate, concat or sum"""

    def __init__(self, config: TrainConfig, rng: np.random.Generator):
        d = config.hidden_channels
        self.scale_names: Tuple[str, ...] = tuple(config.ablation.scales)
        self.mode = config.ablation.fusion
        self.blocks = [BilinearAttention(d, config.fusion_heads, config.bilinear_k, rng) for _ in self.scale_names]
        self.gate = Parameter(np.zeros(len(self.scale_names))) if self.mode == "bilinear" else None
        self.combine = Linear(len(self.scale_names) * d, d, rng) if self.mode == "concat" else None

    def gate_weights(self) -> Tensor:
        return softmax(self.gate, axis=0)

    def fuse_scales(self, residues: Sequence[Tensor]) -> Tensor:
        if self.mode == "concat":
            return self.combine(concat(list(residues), axis=-1))
        if self.mode == "add":
            total = residues[0]
            for r in residues[1:]:
                total = total + r
            return total
        weights = self.gate_weights()
        total = residues[0] * index(weights, 0)
        for i, r in enumerate(residues[1:], start=1):
            total = total + r * index(weights, i)
        return total

    def forward(self, drug: Dict[str, Tuple[Tensor, np.ndarray]], clusters: Tensor,
                cluster_mask: np.ndarray) -> Tuple[Tensor, Dict[str, ScaleAttention]]:
        results: Dict[str, ScaleAttention] = {}
        for name, block in zip(self.scale_names, self.blocks):
            v, v_mask = drug[name]
            results[name] = block(v, v_mask, clusters, cluster_mask)
        fused = self.fuse_scales([results[name].residues for name in self.scale_names])
        return fused, results
