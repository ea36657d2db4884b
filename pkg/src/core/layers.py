# src/core/layers.py
"""
Parameter containers and the small set of layers the encoders are built from.

A Module discovers its parameters by walking its attributes: Parameter
instances, child Modules and lists of child Modules. Names are dotted paths
(`drug.pna.0.pre.layers.0.weight`), which is also the checkpoint naming.
"""

import logging
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CheckpointVersionError, DimensionError
from .rng import SeededRng
from .tensor import Tensor, concat, dropout, gather, index, layer_norm, relu, sigmoid, stack, tanh

logger = logging.getLogger(__name__)


class Parameter(Tensor):
    """Trainable leaf tensor"""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, name=name)


# --- initializers ---

def he_uniform(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


class Module:
    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    # --- traversal ---
    def _children(self) -> Iterator[Tuple[str, object]]:
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            yield key, value

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for key, value in self._children():
            full = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def parameters(self) -> "OrderedDict[str, Parameter]":
        return OrderedDict(self.named_parameters())

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    # --- buffers: non-trainable arrays saved with the checkpoint ---
    def register_buffer(self, name: str, value: np.ndarray) -> None:
        if "_buffers" not in vars(self):
            self._buffers: Dict[str, np.ndarray] = OrderedDict()
        self._buffers[name] = np.asarray(value, dtype=np.float64)

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in vars(self).get("_buffers", {}).items():
            yield f"{prefix}{name}", value
        for key, value in self._children():
            if isinstance(value, Module):
                yield from value.named_buffers(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{prefix}{key}.{i}.")

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict((k, p.data.copy()) for k, p in self.named_parameters())
        for k, b in self.named_buffers():
            state[f"buffer.{k}"] = b.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = [k for k in params if k not in state]
        if missing:
            raise CheckpointVersionError(f"checkpoint lacks {len(missing)} parameter(s), e.g. {missing[0]}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise CheckpointVersionError(
                    f"parameter {name}: checkpoint shape {value.shape} vs model {p.data.shape}")
            p.data[...] = value
        owners = {prefix: m for prefix, m in self._buffer_owners()}
        for key, value in state.items():
            if not key.startswith("buffer."):
                continue
            path = key[len("buffer."):]
            owner_path, _, name = path.rpartition(".")
            owner = owners.get(owner_path)
            if owner is not None:
                owner.register_buffer(name, value)

    def _buffer_owners(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix.rstrip("."), self
        for key, value in self._children():
            if isinstance(value, Module):
                yield from value._buffer_owners(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item._buffer_owners(f"{prefix}{key}.{i}.")

    # --- modes ---
    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.grad = None


class Linear(Module):
    """y = x W + b with W stored in×out, He-uniform init, zero bias"""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(he_uniform(rng, in_features, (in_features, out_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise DimensionError("linear", x.shape, self.weight.shape)
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.eps = eps
        self.gain = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)


class Dropout(Module):
    """Inverted dropout drawing its mask from (rng, stream, call counter)"""

    def __init__(self, p: float, rng: SeededRng, stream: str):
        self.p = float(p)
        self._rng = rng
        self._stream = stream
        self._calls = 0

    def forward(self, x: Tensor) -> Tensor:
        if not self.training or self.p <= 0.0:
            return x
        out = dropout(x, self.p, True, self._rng, self._stream, self._calls)
        self._calls += 1
        return out

    def reset(self) -> None:
        self._calls = 0


class MLP(Module):
    """Linear layers with ReLU between them; dropout after each hidden activation"""

    def __init__(self, dims: Sequence[int], rng: np.random.Generator,
                 dropout_p: float = 0.0, seeded: Optional[SeededRng] = None,
                 stream: str = "mlp", final_activation: bool = False, bias_last: bool = True):
        if len(dims) < 2:
            raise ValueError(f"MLP needs at least two widths, got {list(dims)}")
        self.layers: List[Linear] = [
            Linear(dims[i], dims[i + 1], rng, bias=(bias_last or i < len(dims) - 2))
            for i in range(len(dims) - 1)
        ]
        self.final_activation = final_activation
        self.drop = Dropout(dropout_p, seeded or SeededRng(0), stream) if dropout_p > 0 else None

    def forward(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.final_activation:
                x = relu(x)
                if i < last and self.drop is not None:
                    x = self.drop(x)
        return x


class Embedding(Module):
    def __init__(self, num: int, dim: int, rng: np.random.Generator):
        self.weight = Parameter(rng.normal(0.0, 0.02, size=(num, dim)))

    def forward(self, ids: np.ndarray) -> Tensor:
        return gather(self.weight, ids)


class LSTMDirection(Module):
    """One direction of an LSTM over a padded batch; gates ordered i, f, g, o"""

    def __init__(self, in_features: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.w_ih = Parameter(he_uniform(rng, in_features, (in_features, 4 * hidden)))
        self.w_hh = Parameter(np.concatenate([orthogonal(rng, hidden, hidden) for _ in range(4)], axis=1))
        self.bias = Parameter(np.zeros(4 * hidden))

    def forward(self, x: Tensor, mask: np.ndarray) -> Tensor:
        """x: B×L×in, mask: B×L (valid prefix per row) -> B×L×hidden, zero at padding"""
        batch, length = mask.shape
        H = self.hidden
        h = Tensor(np.zeros((batch, H)))
        c = Tensor(np.zeros((batch, H)))
        projected = x @ self.w_ih + self.bias
        outputs = []
        for t in range(length):
            gates = index(projected, (slice(None), t)) + h @ self.w_hh
            i = sigmoid(index(gates, (slice(None), slice(0, H))))
            f = sigmoid(index(gates, (slice(None), slice(H, 2 * H))))
            g = tanh(index(gates, (slice(None), slice(2 * H, 3 * H))))
            o = sigmoid(index(gates, (slice(None), slice(3 * H, 4 * H))))
            c_new = f * c + i * g
            h_new = o * tanh(c_new)
            keep = mask[:, t:t + 1].astype(np.float64)
            c = c_new * keep + c * (1.0 - keep)
            h = h_new * keep + h * (1.0 - keep)
            outputs.append(h_new * keep)
        return stack(outputs, axis=1)


class BiLSTM(Module):
    """Forward and backward passes over each row's valid prefix, concatenated"""

    def __init__(self, in_features: int, hidden: int, rng: np.random.Generator):
        self.forward_dir = LSTMDirection(in_features, hidden, rng)
        self.backward_dir = LSTMDirection(in_features, hidden, rng)

    def forward(self, rows: Tensor, dense_index: np.ndarray, reverse_index: np.ndarray,
                mask: np.ndarray) -> Tuple[Tensor, Tensor]:
        """
        rows: N×in, dense_index/reverse_index: B×L pointers into rows (N = padding).
        Returns per-direction dense outputs B×L×hidden; the backward output is
        in reversed position order.
        """
        padded = concat([rows, Tensor(np.zeros((1, rows.shape[1])))], axis=0)
        fwd = self.forward_dir(gather(padded, dense_index), mask)
        bwd = self.backward_dir(gather(padded, reverse_index), mask)
        return fwd, bwd
