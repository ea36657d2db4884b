# src/core/pna.py
"""
Principal-neighbourhood-aggregation message passing, shared by the drug
(bond features) and protein (contact RBF features) local pathways.
"""

import logging
from typing import List, Sequence

import numpy as np

from .layers import Linear, Module
from .tensor import Tensor, concat, gather, relu, segment_max, segment_mean, segment_min, sqrt

logger = logging.getLogger(__name__)

AGGREGATORS = ("mean", "min", "max", "std")
SCALERS = ("identity", "amplification", "linear")


def degree_statistics(degree_lists: Sequence[np.ndarray]) -> tuple:
    """(δ, δ_lin): mean of log(deg+1) and mean degree over all training nodes"""
    degrees = np.concatenate([np.asarray(d, dtype=np.float64) for d in degree_lists]) if degree_lists else np.zeros(0)
    if degrees.size == 0:
        return 1.0, 1.0
    delta = float(np.mean(np.log(degrees + 1.0)))
    delta_lin = float(np.mean(degrees))
    return (delta if delta > 0 else 1.0), (delta_lin if delta_lin > 0 else 1.0)


def aggregate(messages: Tensor, dst: np.ndarray, num_nodes: int) -> List[Tensor]:
    """mean, min, max, std of incoming messages; nodes without messages get zeros"""
    mean = segment_mean(messages, dst, num_nodes)
    dev = messages - gather(mean, dst)
    std = sqrt(segment_mean(dev * dev, dst, num_nodes))
    return [mean, segment_min(messages, dst, num_nodes), segment_max(messages, dst, num_nodes), std]


class PNALayer(Module):
    """
    m_ij = ReLU(W_pre [x_i ‖ x_j ‖ φ(e_ij)]) for each edge j→i;
    h_i  = scalers ⊗ aggregators over incoming m_ij (12d);
    x'_i = W · ReLU(W_post [x_i ‖ h_i]).
    """

    def __init__(self, dim: int, edge_dim: int, rng: np.random.Generator):
        self.dim = dim
        self.edge_encoder = Linear(edge_dim, dim, rng)
        self.pre = Linear(3 * dim, dim, rng)
        self.post = Linear((1 + len(AGGREGATORS) * len(SCALERS)) * dim, dim, rng)
        self.out = Linear(dim, dim, rng, bias=False)
        self.register_buffer("delta", np.array(1.0))
        self.register_buffer("delta_lin", np.array(1.0))

    def set_degree_statistics(self, delta: float, delta_lin: float) -> None:
        self.register_buffer("delta", np.array(delta))
        self.register_buffer("delta_lin", np.array(delta_lin))

    def forward(self, x: Tensor, src: np.ndarray, dst: np.ndarray, edge_attr: np.ndarray) -> Tensor:
        n = x.shape[0]
        if len(src):
            edge_feats = self.edge_encoder(Tensor(edge_attr))
            messages = relu(self.pre(concat([gather(x, dst), gather(x, src), edge_feats], axis=1)))
            aggregated = concat(aggregate(messages, dst, n), axis=1)
        else:
            aggregated = Tensor(np.zeros((n, len(AGGREGATORS) * self.dim)))

        degree = np.bincount(dst, minlength=n).astype(np.float64)[:, None]
        amplification = np.log(degree + 1.0) / float(self.buffer("delta"))
        linear = degree / float(self.buffer("delta_lin"))
        h = concat([aggregated, aggregated * amplification, aggregated * linear], axis=1)
        return self.out(relu(self.post(concat([x, h], axis=1))))


class PNAStack(Module):
    def __init__(self, dim: int, edge_dim: int, rounds: int, rng: np.random.Generator):
        self.layers = [PNALayer(dim, edge_dim, rng) for _ in range(rounds)]

    def set_degree_statistics(self, delta: float, delta_lin: float) -> None:
        for layer in self.layers:
            layer.set_degree_statistics(delta, delta_lin)

    def forward(self, x: Tensor, src: np.ndarray, dst: np.ndarray, edge_attr: np.ndarray) -> Tensor:
        for layer in self.layers:
            x = layer(x, src, dst, edge_attr)
        return x
