# tests/test_fusion.py
import numpy as np
import pytest

from core.config import parse_ablation
from core.fusion import BilinearAttention, MultiScaleFusion
from core.tensor import Tensor


@pytest.fixture
def block():
    return BilinearAttention(4, 2, 1, np.random.default_rng(3))


@pytest.fixture
def operands(rng):
    v = rng.normal(size=(2, 3, 4))
    r = rng.normal(size=(2, 5, 4))
    v_mask = np.array([[True, True, True], [True, True, False]])
    r_mask = np.ones((2, 5), dtype=bool)
    return v, v_mask, r, r_mask


class TestBilinearAttention:
    def test_scores_match_low_rank_form(self, block, operands):
        v, _, r, _ = operands
        s = block.scores(Tensor(v), Tensor(r)).numpy()
        assert s.shape == (2, 2, 3, 5)
        wv = block.w_v.weight.numpy().reshape(4, 2, 4)
        wr = block.w_r.weight.numpy().reshape(4, 2, 4)
        w = block.channel.numpy()[:, 0, :]
        b = block.bias.numpy()[:, 0, 0]
        for h in range(2):
            expected = np.einsum("bvk,k,brk->bvr", v @ wv[:, h, :], w[h], r @ wr[:, h, :]) + b[h]
            np.testing.assert_allclose(s[:, h], expected, atol=1e-12)

    def test_normalisation_axes(self, block, operands):
        v, v_mask, r, r_mask = operands
        out = block(Tensor(v), v_mask, Tensor(r), r_mask)
        alpha, beta = out.alpha.numpy(), out.beta.numpy()
        np.testing.assert_allclose(alpha.sum(axis=2), 1.0)
        np.testing.assert_allclose(beta[0].sum(axis=-1), 1.0)
        np.testing.assert_allclose(beta[1, :, :2].sum(axis=-1), 1.0)
        # padded drug rows take no attention either way
        np.testing.assert_array_equal(alpha[1, :, 2], 0.0)
        np.testing.assert_array_equal(beta[1, :, 2], 0.0)

    def test_residual_updates(self, block, operands):
        v, v_mask, r, r_mask = operands
        out = block(Tensor(v), v_mask, Tensor(r), r_mask)
        alpha, beta = out.alpha.numpy(), out.beta.numpy()
        r_update = np.einsum("bhvr,bvd->bhrd", alpha, v).mean(axis=1)
        v_update = np.einsum("bhvr,brd->bhvd", beta, r).mean(axis=1)
        np.testing.assert_allclose(out.residues.numpy(), r + r_update, atol=1e-12)
        np.testing.assert_allclose(out.drug.numpy(), v + v_update, atol=1e-12)

    def test_scaled_scores_keep_argmax(self, block, operands):
        v, v_mask, r, r_mask = operands
        block.bias.data[...] = 0.0
        before_scores = block.scores(Tensor(v), Tensor(r)).numpy()
        before_alpha = block(Tensor(v), v_mask, Tensor(r), r_mask).alpha.numpy()
        block.channel.data *= 3.0
        after_scores = block.scores(Tensor(v), Tensor(r)).numpy()
        after_alpha = block(Tensor(v), v_mask, Tensor(r), r_mask).alpha.numpy()
        np.testing.assert_allclose(after_scores, 3.0 * before_scores, atol=1e-12)
        np.testing.assert_array_equal(after_scores.argmax(axis=2), before_scores.argmax(axis=2))
        np.testing.assert_array_equal(after_alpha.argmax(axis=2), before_alpha.argmax(axis=2))

    def test_single_drug_row_adds_itself(self, block, rng):
        v = rng.normal(size=(2, 1, 4))
        r = rng.normal(size=(2, 5, 4))
        out = block(Tensor(v), np.ones((2, 1), dtype=bool), Tensor(r), np.ones((2, 5), dtype=bool))
        np.testing.assert_allclose(out.residues.numpy(), r + v, atol=1e-12)

    def test_identical_drug_rows_add_the_row(self, block, rng):
        row = rng.normal(size=(2, 1, 4))
        v = np.repeat(row, 3, axis=1)
        r = rng.normal(size=(2, 5, 4))
        out = block(Tensor(v), np.ones((2, 3), dtype=bool), Tensor(r), np.ones((2, 5), dtype=bool))
        np.testing.assert_allclose(out.residues.numpy(), r + row, atol=1e-12)

    def test_zero_drug_rows_leave_residues(self, block, rng):
        r = rng.normal(size=(2, 5, 4))
        out = block(Tensor(np.zeros((2, 3, 4))), np.ones((2, 3), dtype=bool), Tensor(r), np.ones((2, 5), dtype=bool))
        np.testing.assert_allclose(out.residues.numpy(), r, atol=1e-12)
        # constant scores spread alpha evenly over the drug rows
        np.testing.assert_allclose(out.alpha.numpy(), 1 / 3)

    def test_rank_k_widens_projection(self):
        wide = BilinearAttention(4, 2, 3, np.random.default_rng(0))
        assert wide.w_v.weight.shape == (4, 24)
        s = wide.scores(Tensor(np.ones((1, 2, 4))), Tensor(np.ones((1, 3, 4))))
        assert s.shape == (1, 2, 2, 3)


class TestMultiScaleFusion:
    def test_gate_starts_uniform(self, small_config, rng):
        fusion = MultiScaleFusion(small_config, rng)
        np.testing.assert_allclose(fusion.gate_weights().numpy(), np.full(3, 1 / 3))
        parts = [Tensor(rng.normal(size=(1, 2, 8))) for _ in range(3)]
        fused = fusion.fuse_scales(parts).numpy()
        np.testing.assert_allclose(fused, np.mean([p.numpy() for p in parts], axis=0), atol=1e-12)

    def test_add_mode(self, small_config, rng):
        config = small_config.with_overrides(ablation=parse_ablation("fusion=add"))
        fusion = MultiScaleFusion(config, rng)
        assert fusion.gate is None and fusion.combine is None
        parts = [Tensor(np.full((1, 2, 8), float(k))) for k in range(3)]
        np.testing.assert_allclose(fusion.fuse_scales(parts).numpy(), 3.0)

    def test_concat_mode(self, small_config, rng):
        config = small_config.with_overrides(ablation=parse_ablation("fusion=concat,scales=atom+mol"))
        fusion = MultiScaleFusion(config, rng)
        assert fusion.scale_names == ("atom", "mol")
        assert fusion.combine.weight.shape == (16, 8)
        assert fusion.fuse_scales([Tensor(np.ones((1, 2, 8)))] * 2).shape == (1, 2, 8)

    def test_forward_uses_only_enabled_scales(self, small_config, rng):
        config = small_config.with_overrides(ablation=parse_ablation("scales=mol"))
        fusion = MultiScaleFusion(config, rng)
        clusters = Tensor(rng.normal(size=(2, 2, 8)))
        drug = {"mol": (Tensor(rng.normal(size=(2, 1, 8))), np.ones((2, 1), dtype=bool))}
        fused, attention = fusion(drug, clusters, np.ones((2, 2), dtype=bool))
        assert list(attention) == ["mol"]
        assert fused.shape == (2, 2, 8)
        # a single drug row gets all of alpha
        np.testing.assert_allclose(attention["mol"].alpha.numpy(), 1.0)
