# tests/test_predictor.py
import numpy as np
import pytest

from core.checkpoint import decode_checkpoint
from core.errors import CheckpointVersionError, UsageError
from core.model import HifDTA, config_sidecar
from core.optim import AdamState, adam_step
from core.predictor import AffinityHead, ProteinPool
from core.rng import SeededRng
from core.tensor import Tensor, backward, no_grad


@pytest.fixture
def model(small_config):
    m = HifDTA(small_config)
    m.eval()
    return m


class TestPools:
    def test_atom_weights_sum_to_one_per_drug(self, model, small_batch):
        out = model(small_batch)
        weights = out.atom_weights.numpy()[:, 0]
        for m in range(small_batch.size):
            assert weights[small_batch.drug.atom_batch == m].sum() == pytest.approx(1.0)

    def test_residue_weights_skip_padding(self, model, small_batch):
        out = model(small_batch)
        weights = out.residue_weights.numpy()[..., 0]
        mask = small_batch.prot.layout.mask
        np.testing.assert_allclose(weights.sum(axis=1), 1.0)
        np.testing.assert_array_equal(weights[~mask], 0.0)

    def test_protein_pool_on_uniform_scores(self, rng):
        pool = ProteinPool(4, rng)
        pool.scorer.weight.data[...] = 0.0
        residues = rng.normal(size=(1, 3, 4))
        chain = Tensor(np.full((1, 3, 2), 0.5))
        weights = pool.attention(Tensor(rng.normal(size=(1, 2, 4))), chain, np.ones((1, 3), dtype=bool))
        np.testing.assert_allclose(weights.numpy()[0, :, 0], 1 / 3)
        pooled, _ = pool(Tensor(np.zeros((1, 2, 4))), chain, Tensor(residues), np.ones((1, 3), dtype=bool))
        assert pooled.shape == (1, 4)


class TestHead:
    def test_shape_and_eval_determinism(self, small_config, rng):
        head = AffinityHead(small_config.with_overrides(dropout=0.5), rng, SeededRng(0))
        p, q = Tensor(rng.normal(size=(3, 8))), Tensor(rng.normal(size=(3, 8)))
        head.eval()
        a, b = head(p, q).numpy(), head(p, q).numpy()
        assert a.shape == (3,)
        np.testing.assert_array_equal(a, b)
        head.train()
        assert not np.allclose(head(p, q).numpy(), a)

    def test_layer_widths(self, small_config, rng):
        head = AffinityHead(small_config, rng, SeededRng(0))
        assert [layer.weight.shape for layer in head.mlp.layers] == [(16, 8), (8, 4), (4, 1)]


class TestModel:
    def test_forward(self, model, small_batch, small_config):
        out = model(small_batch)
        assert out.prediction.shape == (2,)
        assert np.all(np.isfinite(out.prediction.numpy()))
        assert set(out.attention) == {"atom", "sub", "mol"}
        assert out.attention["sub"].alpha.shape[-1] == small_config.cluster_sizes[-1]

    def test_loss_composition(self, model, small_batch):
        total, mse, out = model.loss(small_batch)
        expected = np.mean((out.prediction.numpy() - small_batch.labels) ** 2)
        assert mse.item() == pytest.approx(expected)
        assert total.item() == pytest.approx(expected + out.aux_loss.item())

    def test_loss_needs_labels(self, model, small_batch):
        small_batch.labels = None
        with pytest.raises(UsageError):
            model.loss(small_batch)

    def test_same_seed_same_weights(self, small_config):
        a = HifDTA(small_config).state_dict()
        b = HifDTA(small_config).state_dict()
        c = HifDTA(small_config, seed=1).state_dict()
        assert all(np.array_equal(a[k], b[k]) for k in a)
        assert not all(np.array_equal(a[k], c[k]) for k in a)

    def test_fits_two_pairs(self, small_config, small_batch):
        model = HifDTA(small_config.with_overrides(lambda_aux=0.0))
        model.train()
        state = AdamState(lr=1e-2)
        first = None
        for _ in range(150):
            model.zero_grad()
            total, mse, _ = model.loss(small_batch)
            backward(total)
            params = model.parameters()
            for p in params.values():
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)
            adam_step(params, state)
            first = mse.item() if first is None else first
        model.eval()
        with no_grad():
            _, final, _ = model.loss(small_batch)
        assert final.item() < 0.05 * first


class TestPersistence:
    def test_round_trip(self, model, small_batch, tmp_path):
        path = model.save(tmp_path / "model.ckpt")
        assert config_sidecar(path).exists()
        stored = decode_checkpoint(path.read_bytes())
        assert stored["meta.hidden_channels"] == 8.0
        loaded = HifDTA.from_checkpoint(path)
        loaded.eval()
        np.testing.assert_array_equal(loaded(small_batch).prediction.numpy(), model(small_batch).prediction.numpy())

    def test_fitted_buffers_survive(self, model, small_batch, tmp_path):
        model.protein.project.set_physchem_statistics(np.full(12, 2.0), np.full(12, 3.0))
        path = model.save(tmp_path / "model.ckpt")
        loaded = HifDTA.from_checkpoint(path)
        np.testing.assert_array_equal(loaded.protein.project.buffer("physchem_mean"), 2.0)

    def test_architecture_mismatch(self, model, small_config, tmp_path):
        path = model.save(tmp_path / "model.ckpt")
        wider = HifDTA(small_config.with_overrides(hidden_channels=12, drug_heads=2, fusion_heads=2))
        with pytest.raises(CheckpointVersionError, match="hidden_channels"):
            wider.load_weights(path)

    def test_missing_sidecar(self, model, tmp_path):
        path = model.save(tmp_path / "model.ckpt")
        config_sidecar(path).unlink()
        with pytest.raises(CheckpointVersionError, match="sidecar"):
            HifDTA.from_checkpoint(path)
