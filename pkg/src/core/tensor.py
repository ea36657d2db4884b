# src/core/tensor.py
"""
Dense f64 tensors with reverse-mode differentiation.

Every forward op records its inputs and a vector-Jacobian product closure on
the output tensor. `backward(root)` orders the recorded ops topologically
into a Tape and replays the adjoints once each, in reverse.
"""

import logging
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .errors import DimensionError, NumericError, UsageError

logger = logging.getLogger(__name__)

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]
Vjp = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Run a block without recording ops (inference, finite differences)"""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """Dense row-major float64 array that can take part in a tape"""

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.op: Optional[str] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._vjp: Optional[Vjp] = None

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "Tensor":
        out = cls.__new__(cls)
        out.data = array if array.dtype == np.float64 else array.astype(np.float64)
        out.requires_grad = False
        out.grad = None
        out.name = None
        out.op = None
        out._parents = ()
        out._vjp = None
        return out

    # --- convenience ---
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._vjp is None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{req}{nm})"

    # --- operators ---
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, key) -> "Tensor":
        return index(self, key)

    # --- method forms ---
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self) -> "Tensor":
        return transpose(self, None)

    def relu(self) -> "Tensor":
        return relu(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def sqrt(self) -> "Tensor":
        return sqrt(self)

    def softplus(self) -> "Tensor":
        return softplus(self)

    def backward(self) -> None:
        backward(self)


def as_tensor(value: ArrayLike) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor._wrap(np.asarray(value, dtype=np.float64))


def _record(op: str, out: np.ndarray, parents: Sequence[Tensor], vjp: Vjp) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise NumericError(op)
    result = Tensor._wrap(out)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        result.requires_grad = True
        result.op = op
        result._parents = tuple(parents)
        result._vjp = vjp
    return result


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(op, a.shape, b.shape) from None


# --- elementwise binary ----------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)
    return _record("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("sub", a, b)
    return _record("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("mul", a, b)
    return _record("mul", a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("div", a, b)
    out = a.data / b.data

    def vjp(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _record("div", out, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul", a.shape, b.shape)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError("matmul", a.shape, b.shape) from None

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _record("matmul", out, (a, b), vjp)


# --- elementwise unary -----------------------------------------------------

def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0
    return _record("relu", np.where(positive, x.data, 0.0), (x,), lambda g: (g * positive,))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = expit(x.data)
    return _record("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _record("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def exp(x: Tensor) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    return _record("exp", out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return _record("log", out, (x,), lambda g: (g / x.data,))


def softplus(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.data)
    slope = expit(x.data)
    return _record("softplus", out, (x,), lambda g: (g * slope,))


def sqrt(x: Tensor) -> Tensor:
    """Square root; the derivative at exactly zero is taken as zero"""
    x = as_tensor(x)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(x.data)
    positive = out > 0
    safe = np.where(positive, out, 1.0)
    return _record("sqrt", out, (x,), lambda g: (np.where(positive, 0.5 * g / safe, 0.0),))


# --- shape ops ---------------------------------------------------------------

def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError("reshape", x.shape, shape) from None
    return _record("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(range(x.ndim))[::-1]
    axes = tuple(axes)
    if sorted(a % x.ndim for a in axes) != list(range(x.ndim)):
        raise DimensionError("transpose", x.shape, detail=f"axes {axes}")
    inverse = tuple(np.argsort([a % x.ndim for a in axes]))
    return _record("transpose", np.transpose(x.data, axes), (x,),
                   lambda g: (np.transpose(g, inverse),))


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise UsageError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError("concat", *[t.shape for t in tensors], detail=f"axis={axis}") from None
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return _record("concat", out, tensors, lambda g: tuple(np.split(g, cuts, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise UsageError("stack needs at least one tensor")
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError("stack", *[t.shape for t in tensors]) from None
    count = len(tensors)
    return _record("stack", out, tensors,
                   lambda g: tuple(np.take(g, i, axis=axis) for i in range(count)))


def _is_basic_key(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)


def index(x: Tensor, key) -> Tensor:
    x = as_tensor(x)
    try:
        out = np.array(x.data[key])
    except IndexError:
        raise DimensionError("index", x.shape, detail=f"key {key!r}") from None
    basic = _is_basic_key(key)

    def vjp(g):
        full = np.zeros_like(x.data)
        if basic:
            full[key] += g
        else:
            np.add.at(full, key, g)
        return (full,)

    return _record("index", out, (x,), vjp)


def gather(rows: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows along axis 0; output shape is idx.shape + rows.shape[1:]"""
    rows = as_tensor(rows)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= rows.shape[0]):
        raise DimensionError("gather", rows.shape, idx.shape, detail="index out of range")
    out = rows.data[idx]

    def vjp(g):
        full = np.zeros_like(rows.data)
        np.add.at(full, idx, g)
        return (full,)

    return _record("gather", out, (rows,), vjp)


# --- reductions --------------------------------------------------------------

def _normalise_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def reduce_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalise_axes(axis, x.ndim)
    out = np.sum(x.data, axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _record("sum", np.asarray(out), (x,), vjp)


def reduce_mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalise_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(reduce_sum(x, axes, keepdims), 1.0 / max(count, 1))


def softmax(x: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax along `axis`; positions where mask is False get exactly 0"""
    x = as_tensor(x)
    z = x.data
    valid = None
    if mask is not None:
        try:
            valid = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        except ValueError:
            raise DimensionError("softmax", x.shape, np.shape(mask), detail="mask") from None
        z = np.where(valid, z, -np.inf)
    peak = np.max(z, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    e = np.exp(z - peak)
    if valid is not None:
        e = np.where(valid, e, 0.0)
    total = e.sum(axis=axis, keepdims=True)
    out = np.divide(e, total, out=np.zeros_like(e), where=total > 0)

    def vjp(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _record("softmax", out, (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis; a constant row maps to 0 before gain/bias"""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if gain.shape[-1] != x.shape[-1] or bias.shape[-1] != x.shape[-1]:
        raise DimensionError("layer_norm", x.shape, gain.shape, bias.shape)
    centred = x.data - x.data.mean(axis=-1, keepdims=True)
    var = np.mean(centred * centred, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centred * inv
    out = xhat * gain.data + bias.data

    def vjp(g):
        gx = g * gain.data
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True)
                    - xhat * np.mean(gx * xhat, axis=-1, keepdims=True))
        return dx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return _record("layer_norm", out, (x, gain, bias), vjp)


def dropout(x: Tensor, p: float, train: bool, rng=None, stream: int = 0, counter: int = 0) -> Tensor:
    """Inverted dropout; identity in eval mode or when p == 0"""
    x = as_tensor(x)
    if not train or p <= 0.0:
        return x
    if p >= 1.0:
        raise UsageError(f"dropout probability must be < 1, got {p}")
    if rng is None:
        raise UsageError("dropout in train mode needs a SeededRng")
    keep = rng.generator(stream, counter).random(x.shape) >= p
    scale = keep / (1.0 - p)
    return _record("dropout", x.data * scale, (x,), lambda g: (g * scale,))


# --- segment ops -------------------------------------------------------------

def _check_segments(op: str, values: Tensor, ids: np.ndarray, num_segments: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or ids.shape[0] != values.shape[0]:
        raise DimensionError(op, values.shape, ids.shape, detail="segment ids")
    if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
        raise DimensionError(op, values.shape, ids.shape, detail=f"ids outside [0, {num_segments})")
    return ids


def segment_sum(values: Tensor, ids: np.ndarray, num_segments: int) -> Tensor:
    values = as_tensor(values)
    ids = _check_segments("segment_sum", values, ids, num_segments)
    out = np.zeros((num_segments,) + values.shape[1:])
    np.add.at(out, ids, values.data)
    return _record("segment_sum", out, (values,), lambda g: (g[ids],))


def segment_counts(ids: np.ndarray, num_segments: int) -> np.ndarray:
    return np.bincount(np.asarray(ids, dtype=np.int64), minlength=num_segments).astype(np.float64)


def segment_mean(values: Tensor, ids: np.ndarray, num_segments: int) -> Tensor:
    values = as_tensor(values)
    ids = _check_segments("segment_mean", values, ids, num_segments)
    counts = np.maximum(segment_counts(ids, num_segments), 1.0)
    shape = (num_segments,) + (1,) * (values.ndim - 1)
    return div(segment_sum(values, ids, num_segments), counts.reshape(shape))


def _segment_extreme(op: str, values: Tensor, ids: np.ndarray, num_segments: int, largest: bool) -> Tensor:
    values = as_tensor(values)
    ids = _check_segments(op, values, ids, num_segments)
    fill = -np.inf if largest else np.inf
    out = np.full((num_segments,) + values.shape[1:], fill)
    (np.maximum if largest else np.minimum).at(out, ids, values.data)
    empty = ~np.isfinite(out)
    out[empty] = 0.0
    winners = (values.data == out[ids]).astype(np.float64)
    ties = np.zeros_like(out)
    np.add.at(ties, ids, winners)
    share = winners / np.maximum(ties[ids], 1.0)
    return _record(op, out, (values,), lambda g: (g[ids] * share,))


def segment_max(values: Tensor, ids: np.ndarray, num_segments: int) -> Tensor:
    """Per-segment maximum; empty segments give 0, ties share the gradient"""
    return _segment_extreme("segment_max", values, ids, num_segments, largest=True)


def segment_min(values: Tensor, ids: np.ndarray, num_segments: int) -> Tensor:
    return _segment_extreme("segment_min", values, ids, num_segments, largest=False)


def segment_softmax(scores: Tensor, ids: np.ndarray, num_segments: int) -> Tensor:
    """Softmax over the rows of each segment, independently per trailing column"""
    scores = as_tensor(scores)
    ids = _check_segments("segment_softmax", scores, ids, num_segments)
    peak = np.full((num_segments,) + scores.shape[1:], -np.inf)
    np.maximum.at(peak, ids, scores.data)
    peak[~np.isfinite(peak)] = 0.0
    e = exp(scores - peak[ids])
    total = segment_sum(e, ids, num_segments)
    return e / gather(total, ids)


# --- tape --------------------------------------------------------------------

class Tape:
    """Ops reachable from a root, in topological order (inputs first)"""

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: Tensor) -> "Tape":
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def replay(self, root: Tensor) -> None:
        grads = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                node.grad = np.array(g) if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg


def backward(root: Tensor) -> Optional[Tape]:
    """Populate .grad on every requires_grad leaf reachable from a scalar root"""
    if root.data.size != 1:
        raise UsageError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return None
    tape = Tape.from_root(root)
    tape.replay(root)
    return tape


def zeros(shape: Iterable[int]) -> Tensor:
    return Tensor._wrap(np.zeros(tuple(shape)))
