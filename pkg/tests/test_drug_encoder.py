# tests/test_drug_encoder.py
import numpy as np
import pytest

from core.batch import collate_drugs
from core.config import parse_ablation
from core.drug_encoder import DrugEncoder
from core.errors import DimensionError
from core.layers import BiLSTM, LSTMDirection
from core.pna import PNALayer, aggregate, degree_statistics
from core.rng import SeededRng
from core.tensor import Tensor
from data_loaders.feature_cache import drug_sample

from conftest import BENZENE, CAFFEINE, TOLUENE


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@pytest.fixture
def encoder(small_config):
    model = DrugEncoder(small_config, np.random.default_rng(0), SeededRng(0))
    model.eval()
    return model


class TestAggregators:
    def test_statistics_per_node(self):
        messages = Tensor(np.array([[1.0], [2.0], [4.0], [3.0]]))
        dst = np.array([0, 0, 0, 2])
        mean, low, high, std = (t.numpy() for t in aggregate(messages, dst, 3))
        np.testing.assert_allclose(mean[:, 0], [7 / 3, 0.0, 3.0])
        np.testing.assert_allclose(low[:, 0], [1.0, 0.0, 3.0])
        np.testing.assert_allclose(high[:, 0], [4.0, 0.0, 3.0])
        expected_std = np.sqrt(np.mean((np.array([1.0, 2.0, 4.0]) - 7 / 3) ** 2))
        np.testing.assert_allclose(std[:, 0], [expected_std, 0.0, 0.0], atol=1e-12)

    def test_degree_statistics(self):
        delta, delta_lin = degree_statistics([np.array([0, 1]), np.array([3])])
        assert delta == pytest.approx(np.mean(np.log([1.0, 2.0, 4.0])))
        assert delta_lin == pytest.approx(4 / 3)
        assert degree_statistics([]) == (1.0, 1.0)
        assert degree_statistics([np.zeros(4)]) == (1.0, 1.0)


class TestPNALayer:
    @pytest.fixture
    def layer(self):
        return PNALayer(4, 5, np.random.default_rng(1))

    @pytest.fixture
    def graph(self, rng):
        x = rng.normal(size=(4, 4))
        src = np.array([0, 1, 1, 2, 2, 3])
        dst = np.array([1, 0, 2, 1, 3, 2])
        attr = rng.normal(size=(6, 5))
        return x, src, dst, attr

    def test_edge_order_does_not_matter(self, layer, graph, rng):
        x, src, dst, attr = graph
        perm = rng.permutation(len(src))
        a = layer(Tensor(x), src, dst, attr).numpy()
        b = layer(Tensor(x), src[perm], dst[perm], attr[perm]).numpy()
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_node_relabelling_is_equivariant(self, layer, graph):
        x, src, dst, attr = graph
        perm = np.array([2, 0, 3, 1])            # new id -> old id
        new_of_old = np.argsort(perm)
        out = layer(Tensor(x), src, dst, attr).numpy()
        relabelled = layer(Tensor(x[perm]), new_of_old[src], new_of_old[dst], attr).numpy()
        np.testing.assert_allclose(relabelled, out[perm], atol=1e-12)

    def test_graph_without_edges(self, layer):
        out = layer(Tensor(np.ones((1, 4))), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                    np.zeros((0, 5)))
        assert out.shape == (1, 4)
        assert np.all(np.isfinite(out.numpy()))


class TestBiLSTM:
    def test_single_step_matches_gate_equations(self, rng):
        cell = LSTMDirection(3, 2, rng)
        x = rng.normal(size=(1, 1, 3))
        out = cell(Tensor(x), np.ones((1, 1), dtype=bool)).numpy()[0, 0]
        gates = x[0, 0] @ cell.w_ih.numpy() + cell.bias.numpy()
        i, g, o = sigmoid(gates[0:2]), np.tanh(gates[4:6]), sigmoid(gates[6:8])
        np.testing.assert_allclose(out, o * np.tanh(i * g), atol=1e-12)

    def test_padding_leaves_prefix_untouched(self, rng):
        cell = LSTMDirection(3, 2, rng)
        x = rng.normal(size=(1, 4, 3))
        short = cell(Tensor(x[:, :2]), np.ones((1, 2), dtype=bool)).numpy()
        mask = np.array([[True, True, False, False]])
        padded = cell(Tensor(x), mask).numpy()
        np.testing.assert_allclose(padded[:, :2], short, atol=1e-12)
        np.testing.assert_array_equal(padded[:, 2:], 0.0)

    def test_reverse_pass_reads_backwards(self, rng):
        lstm = BiLSTM(3, 2, rng)
        rows = Tensor(rng.normal(size=(3, 3)))
        mask = np.ones((1, 3), dtype=bool)
        _, bwd = lstm(rows, np.array([[0, 1, 2]]), np.array([[2, 1, 0]]), mask)
        alone = lstm.backward_dir(Tensor(rows.numpy()[[2, 1, 0]][None]), mask).numpy()
        np.testing.assert_allclose(bwd.numpy(), alone, atol=1e-12)


class TestDrugEncoder:
    def test_scales_shapes(self, encoder, small_config):
        batch = collate_drugs([drug_sample(TOLUENE), drug_sample(CAFFEINE)])
        scales = encoder(batch)
        d = small_config.hidden_channels
        assert scales.atoms.shape == (batch.num_atoms, d)
        assert scales.clusters.shape == (batch.num_clusters, d)
        assert scales.molecules.shape == (2, d)
        assert scales.attention.shape == (batch.num_clusters, small_config.drug_heads)

    def test_attention_normalised_per_molecule(self, encoder):
        batch = collate_drugs([drug_sample(TOLUENE), drug_sample(CAFFEINE), drug_sample("CCO")])
        weights = encoder(batch).attention.numpy()
        for m in range(3):
            np.testing.assert_allclose(weights[batch.cluster_batch == m].sum(axis=0), 1.0)

    def test_substructure_pooling_is_member_mean(self, encoder, rng):
        batch = collate_drugs([drug_sample(TOLUENE)])
        atoms = rng.normal(size=(batch.num_atoms, 8))
        pooled = encoder.pool_substructures(Tensor(atoms), batch).numpy()
        for c in range(batch.num_clusters):
            members = batch.member_atoms[batch.member_clusters == c]
            np.testing.assert_allclose(pooled[c], atoms[members].mean(axis=0))

    def test_batch_composition_does_not_leak(self, encoder):
        alone = encoder(collate_drugs([drug_sample(BENZENE)])).molecules.numpy()
        mixed = encoder(collate_drugs([drug_sample(CAFFEINE), drug_sample(BENZENE)])).molecules.numpy()
        np.testing.assert_allclose(mixed[1], alone[0], atol=1e-10)

    def test_single_atom_molecule(self, encoder):
        scales = encoder(collate_drugs([drug_sample("C")]))
        assert scales.clusters.shape[0] == 1
        np.testing.assert_allclose(scales.attention.numpy(), 1.0)

    @pytest.mark.parametrize("spec, lstm, pna", [
        ("drug_global_only", True, False),
        ("drug_local_only", False, True),
        ("", True, True),
    ])
    def test_pathway_ablations(self, small_config, spec, lstm, pna):
        config = small_config.with_overrides(ablation=parse_ablation(spec))
        model = DrugEncoder(config, np.random.default_rng(0), SeededRng(0))
        assert (model.bilstm is not None) == lstm
        assert (model.pna is not None) == pna
        model.eval()
        assert model(collate_drugs([drug_sample(TOLUENE)])).molecules.shape == (1, 8)

    def test_wrong_feature_width(self, encoder):
        with pytest.raises(DimensionError, match="embed_atoms"):
            encoder.embed(Tensor(np.zeros((2, 40))))
