# src/core/ssm.py
import logging

import numpy as np

from .layers import Module, Parameter, he_uniform, orthogonal
from .tensor import Tensor, exp, index, reshape, softplus, stack

logger = logging.getLogger(__name__)


class SelectiveSSM(Module):
    """
    Diagonal selective state-space layer over a padded batch B×L×d.

        Δ_t = softplus(x_t W_Δ + b_Δ)          (d)
        B_t = x_t W_B,  C_t = x_t W_C          (n)
        h_t = exp(Δ_t ⊗ A) ⊙ h_{t-1} + (Δ_t ⊙ x_t) ⊗ B_t
        y_t = h_t C_t + D ⊙ x_t

    with A = -exp(A_log) of shape d×n. Padded steps keep the state and emit zeros.
    """

    def __init__(self, dim: int, state: int, rng: np.random.Generator):
        self.dim = dim
        self.state = state
        self.w_delta = Parameter(he_uniform(rng, dim, (dim, dim)))
        self.b_delta = Parameter(np.zeros(dim))
        self.w_b = Parameter(orthogonal(rng, dim, state))
        self.w_c = Parameter(orthogonal(rng, dim, state))
        self.a_log = Parameter(np.tile(np.log(np.arange(1, state + 1, dtype=np.float64)), (dim, 1)))
        self.d_skip = Parameter(np.ones(dim))

    def forward(self, x: Tensor, mask: np.ndarray) -> Tensor:
        batch, length = mask.shape
        d, n = self.dim, self.state
        delta = softplus(x @ self.w_delta + self.b_delta)                 # B×L×d
        b_in = x @ self.w_b                                              # B×L×n
        c_out = x @ self.w_c                                             # B×L×n
        a = -exp(self.a_log)                                             # d×n
        decay = exp(reshape(delta, (batch, length, d, 1)) * a)           # B×L×d×n
        drive = reshape(delta * x, (batch, length, d, 1)) * reshape(b_in, (batch, length, 1, n))

        h = Tensor(np.zeros((batch, d, n)))
        outputs = []
        for t in range(length):
            keep = mask[:, t].astype(np.float64).reshape(batch, 1, 1)
            step = index(decay, (slice(None), t)) * h + index(drive, (slice(None), t))
            h = step * keep + h * (1.0 - keep)
            c_t = reshape(index(c_out, (slice(None), t)), (batch, 1, n))
            y = (step * c_t).sum(axis=-1) + self.d_skip * index(x, (slice(None), t))
            outputs.append(y * keep.reshape(batch, 1))
        return stack(outputs, axis=1)

