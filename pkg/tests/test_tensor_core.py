# tests/test_tensor_core.py
"""Tensor ops, the tape, Adam, the seeded generators and the checkpoint codec"""

import zlib

import numpy as np
import pytest

from core.checkpoint import MAGIC, decode_checkpoint, encode_checkpoint
from core.errors import CheckpointVersionError, DimensionError, NumericError, UsageError
from core.gradcheck import finite_diff_check, finite_diff_report
from core.layers import Linear
from core.optim import AdamState, adam_step, clip_grad_norm
from core.rng import SeededRng
from core.tensor import (Tape, Tensor, add, backward, concat, div, dropout, exp, gather, layer_norm, log, matmul,
                         mul, no_grad, reduce_mean, reduce_sum, relu, segment_max, segment_mean, segment_min,
                         segment_softmax, segment_sum, sigmoid, softmax, softplus, sqrt, stack, tanh, transpose)


def leaf(rng, *shape, low=-1.0, high=1.0):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def weighted(t: Tensor, seed: int = 7) -> Tensor:
    """Scalar with a non-uniform upstream gradient"""
    w = np.random.default_rng(seed).normal(size=t.shape)
    return reduce_sum(mul(t, w))


class TestForwardSemantics:
    def test_softmax_uniform(self):
        out = softmax(Tensor([0.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.data, [1 / 3, 1 / 3, 1 / 3])

    def test_masked_softmax_rows(self, rng):
        x = Tensor(rng.normal(size=(4, 6)))
        mask = rng.random((4, 6)) > 0.4
        mask[:, 0] = True
        out = softmax(x, axis=-1, mask=mask)
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-9)
        assert np.all(out.data[~mask] == 0.0)

    def test_fully_masked_row_is_zero(self):
        out = softmax(Tensor([[1.0, 2.0], [3.0, 4.0]]), mask=np.array([[True, True], [False, False]]))
        assert np.all(out.data[1] == 0.0)
        np.testing.assert_allclose(out.data[0].sum(), 1.0)

    def test_layer_norm_constant_row(self):
        out = layer_norm(Tensor(np.full((2, 5), 3.5)), Tensor(np.ones(5)), Tensor(np.zeros(5)))
        np.testing.assert_array_equal(out.data, np.zeros((2, 5)))

    def test_segment_sum(self):
        out = segment_sum(Tensor([[1.0], [2.0], [3.0]]), np.array([0, 0, 1]), 2)
        np.testing.assert_array_equal(out.data, [[3.0], [3.0]])

    def test_segment_sum_empty_segment(self):
        out = segment_sum(Tensor([[1.0, 1.0], [2.0, 2.0]]), np.array([0, 2]), 3)
        np.testing.assert_array_equal(out.data[1], [0.0, 0.0])

    def test_segment_reductions_match_loop(self, rng):
        values = rng.normal(size=(12, 3))
        ids = rng.integers(0, 4, size=12)
        ids[:4] = np.arange(4)
        for op, ref in ((segment_mean, np.mean), (segment_max, np.max), (segment_min, np.min)):
            out = op(Tensor(values), ids, 4).data
            for s in range(4):
                np.testing.assert_allclose(out[s], ref(values[ids == s], axis=0), atol=1e-12)

    def test_segment_softmax_normalises(self, rng):
        ids = np.array([0, 0, 0, 1, 1, 2])
        out = segment_softmax(Tensor(rng.normal(size=(6, 2))), ids, 3).data
        for s in range(3):
            np.testing.assert_allclose(out[ids == s].sum(axis=0), 1.0, atol=1e-12)

    def test_dropout_eval_identity(self, rng):
        x = Tensor(rng.normal(size=(5, 5)))
        assert dropout(x, 0.5, train=False) is x

    def test_dropout_train_reproducible(self, rng):
        x = Tensor(rng.normal(size=(10, 10)))
        a = dropout(x, 0.3, True, SeededRng(5), stream=1, counter=2).data
        b = dropout(x, 0.3, True, SeededRng(5), stream=1, counter=2).data
        c = dropout(x, 0.3, True, SeededRng(5), stream=1, counter=3).data
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        kept = a != 0
        np.testing.assert_allclose(a[kept], x.data[kept] / 0.7)

    def test_dropout_train_needs_rng(self):
        with pytest.raises(UsageError):
            dropout(Tensor(np.ones(3)), 0.5, True)

    def test_shape_mismatch_names_op(self):
        with pytest.raises(DimensionError, match="matmul"):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with pytest.raises(DimensionError, match="add"):
            add(Tensor(np.ones(3)), Tensor(np.ones(4)))

    def test_non_finite_output(self):
        with pytest.raises(NumericError, match="exp"):
            exp(Tensor([1000.0]))
        with pytest.raises(NumericError, match="log"):
            log(Tensor([0.0]))


class TestBackward:
    def test_sum_gradient_is_ones(self, rng):
        x = leaf(rng, 3, 4)
        backward(reduce_sum(x))
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_square_gradient(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        backward(reduce_sum(x * x))
        np.testing.assert_array_equal(x.grad, [2.0, 4.0])

    def test_non_scalar_root(self, rng):
        with pytest.raises(UsageError):
            backward(leaf(rng, 2) * 2.0)

    def test_shared_subexpression_visited_once(self):
        x = Tensor([3.0], requires_grad=True)
        y = x * x
        z = reduce_sum(y + y)
        tape = backward(z)
        np.testing.assert_allclose(x.grad, [12.0])
        assert len(tape) == len({id(n) for n in tape.nodes})

    def test_tape_is_topological(self, rng):
        a, b = leaf(rng, 2, 2), leaf(rng, 2, 2)
        root = reduce_sum(relu(a @ b) + a)
        tape = Tape.from_root(root)
        position = {id(n): k for k, n in enumerate(tape.nodes)}
        for node in tape.nodes:
            for parent in node._parents:
                if parent.requires_grad:
                    assert position[id(parent)] < position[id(node)]

    def test_no_grad_records_nothing(self, rng):
        x = leaf(rng, 3)
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad and y.is_leaf

    def test_grad_accumulates_across_calls(self):
        x = Tensor([1.0], requires_grad=True)
        backward(reduce_sum(x * 2.0))
        backward(reduce_sum(x * 3.0))
        np.testing.assert_allclose(x.grad, [5.0])


class TestFiniteDifferences:
    @pytest.mark.parametrize("name, build", [
        ("matmul", lambda r: ((leaf(r, 3, 4), leaf(r, 4, 2)), lambda a, b: matmul(a, b))),
        ("batched_matmul", lambda r: ((leaf(r, 2, 3, 4), leaf(r, 4, 2)), lambda a, b: a @ b)),
        ("add_broadcast", lambda r: ((leaf(r, 3, 4), leaf(r, 4)), lambda a, b: add(a, b))),
        ("mul", lambda r: ((leaf(r, 3, 4), leaf(r, 3, 1)), lambda a, b: mul(a, b))),
        ("div", lambda r: ((leaf(r, 3), leaf(r, 3, low=1.0, high=2.0)), lambda a, b: div(a, b))),
        ("concat", lambda r: ((leaf(r, 2, 3), leaf(r, 2, 2)), lambda a, b: concat([a, b], axis=1))),
        ("stack", lambda r: ((leaf(r, 2, 3), leaf(r, 2, 3)), lambda a, b: stack([a, b], axis=1))),
        ("relu", lambda r: ((leaf(r, 10),), lambda a: relu(a))),
        ("sigmoid", lambda r: ((leaf(r, 5),), lambda a: sigmoid(a))),
        ("tanh", lambda r: ((leaf(r, 5),), lambda a: tanh(a))),
        ("exp", lambda r: ((leaf(r, 5),), lambda a: exp(a))),
        ("log", lambda r: ((leaf(r, 5, low=0.5, high=2.0),), lambda a: log(a))),
        ("sqrt", lambda r: ((leaf(r, 5, low=0.5, high=2.0),), lambda a: sqrt(a))),
        ("softplus", lambda r: ((leaf(r, 5),), lambda a: softplus(a))),
        ("softmax", lambda r: ((leaf(r, 3, 5),), lambda a: softmax(a, axis=-1))),
        ("masked_softmax", lambda r: ((leaf(r, 3, 4),),
                                      lambda a: softmax(a, axis=0, mask=np.array([[1, 1, 0, 1]] * 2 + [[0, 1, 1, 1]], bool)))),
        ("layer_norm", lambda r: ((leaf(r, 3, 6), leaf(r, 6), leaf(r, 6)), lambda a, g, b: layer_norm(a, g, b))),
        ("transpose", lambda r: ((leaf(r, 2, 3, 4),), lambda a: transpose(a, (2, 0, 1)))),
        ("gather", lambda r: ((leaf(r, 4, 3),), lambda a: gather(a, np.array([0, 2, 2, 3])))),
        ("mean", lambda r: ((leaf(r, 4, 3),), lambda a: reduce_mean(a, axis=0))),
        ("segment_sum", lambda r: ((leaf(r, 6, 2),), lambda a: segment_sum(a, np.array([0, 0, 1, 2, 2, 2]), 4))),
        ("segment_mean", lambda r: ((leaf(r, 6, 2),), lambda a: segment_mean(a, np.array([0, 0, 1, 2, 2, 2]), 3))),
        ("segment_max", lambda r: ((leaf(r, 6, 2),), lambda a: segment_max(a, np.array([0, 0, 1, 2, 2, 2]), 3))),
        ("segment_min", lambda r: ((leaf(r, 6, 2),), lambda a: segment_min(a, np.array([0, 0, 1, 2, 2, 2]), 3))),
        ("segment_softmax", lambda r: ((leaf(r, 6, 2),), lambda a: segment_softmax(a, np.array([0, 0, 1, 2, 2, 2]), 3))),
    ])
    def test_core_op_gradient(self, name, build):
        inputs, op = build(np.random.default_rng(zlib.crc32(name.encode())))
        error = finite_diff_check(lambda: weighted(op(*inputs)), inputs)
        assert error < 1e-5, f"{name}: {error:.3e}"

    def test_linear_mse_tight(self, rng):
        layer = Linear(4, 1, rng)
        x = Tensor(rng.normal(size=(8, 4)))
        y = rng.normal(size=(8, 1))

        def loss():
            residual = layer(x) - y
            return reduce_mean(residual * residual)

        assert finite_diff_check(loss, layer.parameters()) < 1e-7

    def test_constant_function(self, rng):
        x = leaf(rng, 3)
        report = finite_diff_report(lambda: Tensor(2.0), [x])
        assert report.max_rel_error == 0.0
        assert report.coords_checked == 3

    def test_max_coords_limits_probes(self, rng):
        x = leaf(rng, 50)
        report = finite_diff_report(lambda: weighted(x), {"x": x}, max_coords=5)
        assert report.coords_checked == 5
        assert report.worst_param == "x"


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        p = Tensor([1.0, -2.0], requires_grad=True)
        p.grad = np.zeros(2)
        adam_step({"p": p}, AdamState(lr=0.1))
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_descent_step(self):
        x = Tensor([1.0], requires_grad=True)
        backward(reduce_sum(x * x))
        adam_step({"x": x}, AdamState(lr=0.1))
        assert x.data[0] < 1.0

    def test_converges_on_quadratic(self):
        x = Tensor([0.0], requires_grad=True)
        state = AdamState(lr=0.05)
        for _ in range(500):
            x.grad = None
            backward(reduce_sum((x - 3.0) * (x - 3.0)))
            adam_step({"x": x}, state)
        assert abs(x.data[0] - 3.0) < 1e-3
        assert state.step == 500

    def test_missing_gradient(self):
        with pytest.raises(UsageError, match="no gradient"):
            adam_step({"w": Tensor([1.0], requires_grad=True)}, AdamState())

    def test_clip_grad_norm(self):
        p = Tensor([0.0, 0.0], requires_grad=True)
        p.grad = np.array([3.0, 4.0])
        assert clip_grad_norm({"p": p}, 1.0) == pytest.approx(5.0)
        np.testing.assert_allclose(np.linalg.norm(p.grad), 1.0)


class TestSeededRng:
    def test_same_address_same_draws(self):
        a = SeededRng(11).generator("dropout", 4).random(8)
        b = SeededRng(11).generator("dropout", 4).random(8)
        np.testing.assert_array_equal(a, b)

    def test_streams_and_counters_differ(self):
        rng = SeededRng(11)
        base = rng.generator("a", 0).random(4)
        assert not np.array_equal(base, rng.generator("b", 0).random(4))
        assert not np.array_equal(base, rng.generator("a", 1).random(4))
        assert not np.array_equal(base, SeededRng(12).generator("a", 0).random(4))

    def test_identical_init_is_bit_identical(self):
        x = Tensor(np.linspace(-1, 1, 12).reshape(3, 4))
        first = Linear(4, 5, SeededRng(3).generator("init"))(x).data
        second = Linear(4, 5, SeededRng(3).generator("init"))(x).data
        np.testing.assert_array_equal(first, second)


class TestCheckpointCodec:
    def test_round_trip(self, rng):
        arrays = {"drug.w": rng.normal(size=(3, 2)), "bias": np.zeros(4), "scalar": np.array(2.5)}
        decoded = decode_checkpoint(encode_checkpoint(arrays))
        assert list(decoded) == list(arrays)
        for key in arrays:
            np.testing.assert_array_equal(decoded[key], arrays[key])

    def test_bad_magic(self):
        with pytest.raises(CheckpointVersionError, match="not a checkpoint"):
            decode_checkpoint(b"NOPE\x01\x00\x00\x00")

    def test_unknown_version(self):
        blob = MAGIC + np.array([7], dtype="<u4").tobytes()
        with pytest.raises(CheckpointVersionError, match="version 7"):
            decode_checkpoint(blob)

    def test_truncated_payload(self, rng):
        blob = encode_checkpoint({"w": rng.normal(size=(4, 4))})
        with pytest.raises(CheckpointVersionError, match="corrupt"):
            decode_checkpoint(blob[:-9])
