# tests/test_train_cli.py
import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from core.config import TrainConfig, load_config, parse_ablation, save_config
from core.errors import UsageError
from core.trainer import Trainer
from data_loaders.feature_cache import build_pair_dataset
from interfaces.cli_interface import cli, main, read_fasta

TOY_CONFIG = """\
# tiny architecture for command tests
hidden_channels = 8
drug_heads = 2
fusion_heads = 2
dropout = 0.0
total_layer = 1
cluster_sizes = 4,3,2
ssm_state = 3
esm_dim = 6
rbf_centers = 4
rbf_width = 0.2
batch_size = 8
max_epochs = 2
folds = 2
"""


def invoke(*args, stdin=None):
    result = CliRunner(mix_stderr=False).invoke(cli, [str(a) for a in args], input=stdin)
    return result


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "toy.cfg"
    config.write_text(TOY_CONFIG + f"cache_dir = {root / 'cache'}\n")
    run_dir = root / "run"
    result = invoke("train", "--desk", 24, "--config", config, "--embeddings", root / "emb",
                    "--stub-embeddings", "--out", run_dir, "--plot")
    assert result.exit_code == 0, result.stderr
    return {"root": root, "config": config, "run": run_dir, "report": json.loads(result.stdout)}


class TestConfig:
    def test_learning_rate_drop(self):
        config = TrainConfig()
        assert config.lr_at(1) == 1e-3
        assert config.lr_at(100) == 1e-3
        assert config.lr_at(101) == 5e-4

    def test_text_round_trip(self, tmp_path):
        config = TrainConfig(hidden_channels=16, cluster_sizes=(6, 4, 2),
                             ablation=parse_ablation("prot_local_only,fusion=add"), pkd_transform=True)
        assert load_config(save_config(config, tmp_path / "c.cfg")) == config

    @pytest.mark.parametrize("overrides", [
        dict(hidden_channels=7),
        dict(drug_heads=3),
        dict(cluster_sizes=(2, 4)),
        dict(dropout=1.0),
        dict(folds=1),
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(UsageError):
            TrainConfig(**overrides)

    @pytest.mark.parametrize("spec", ["drug_global_only,drug_local_only", "scales=atoms", "fusion=max", "bogus"])
    def test_bad_ablation(self, spec):
        with pytest.raises(UsageError):
            parse_ablation(spec)

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("hidden = 8\n")
        with pytest.raises(UsageError, match="line 1"):
            load_config(path)


class TestTrainer:
    @pytest.fixture
    def dataset(self, tmp_path, small_config, stub_store, desk_records):
        return build_pair_dataset(desk_records, small_config, stub_store, tmp_path / "cache", stub_missing=True)

    def test_deterministic(self, small_config, dataset):
        config = small_config.with_overrides(max_epochs=2, batch_size=8)
        a = Trainer(config).train_fold(dataset, np.arange(16), np.arange(16, 24))
        b = Trainer(config).train_fold(dataset, np.arange(16), np.arange(16, 24))
        assert [r.train_loss for r in a.history] == [r.train_loss for r in b.history]
        np.testing.assert_array_equal(a.predictions, b.predictions)

    def test_early_stop_on_flat_validation(self, small_config, dataset):
        config = small_config.with_overrides(max_epochs=10, patience=1, lr=0.0, batch_size=8)
        seen = []
        result = Trainer(config, on_epoch=lambda fold, record: seen.append(record.epoch)).train_fold(
            dataset, np.arange(16), np.arange(16, 24))
        assert result.stopped_early
        assert result.best_epoch == 1
        assert seen == [1, 2]

    def test_without_validation_monitors_training(self, small_config, dataset):
        config = small_config.with_overrides(max_epochs=1, batch_size=8)
        result = Trainer(config).train_fold(dataset, np.arange(24), np.zeros(0, dtype=np.int64))
        assert np.isnan(result.history[0].val_loss)
        assert result.best_val_loss == pytest.approx(result.history[0].train_mse)
        assert result.report.n == 24

    def test_checkpoints_per_fold(self, small_config, dataset, tmp_path):
        config = small_config.with_overrides(max_epochs=1, batch_size=8, folds=3)
        artifacts = Trainer(config, run_dir=tmp_path / "run").cross_validate(dataset, folds=[1])
        assert [f.fold for f in artifacts.folds] == [1]
        assert (tmp_path / "run" / "fold1.ckpt").exists()
        assert set(artifacts.summary) == {"ci", "mse", "pcc", "rm2"}


class TestTrainCommand:
    def test_artifacts(self, workspace):
        run = workspace["run"]
        for name in ("run.json", "fold0.ckpt", "fold1.ckpt", "fold0.ckpt.cfg", "fold_statistics.csv",
                     "fold_statistics.json", "desk_dataset.tsv", "loss_curves.png", "prediction_scatter.png",
                     "fold_metrics.png"):
            assert (run / name).exists(), name
        report = workspace["report"]
        assert len(report["folds"]) == 2
        assert all(len(f["history"]) <= 2 for f in report["folds"])
        assert report["architecture"]["hidden_channels"] == 8

    def test_fold_out_of_range(self, workspace):
        result = invoke("train", "--desk", 24, "--config", workspace["config"], "--embeddings",
                        workspace["root"] / "emb", "--fold", 7, "--out", workspace["root"] / "bad")
        assert result.exit_code == 1

    def test_needs_data(self, workspace):
        result = invoke("train", "--config", workspace["config"])
        assert result.exit_code == 1


class TestOtherCommands:
    def test_evaluate(self, workspace):
        run = workspace["run"]
        result = invoke("evaluate", "--checkpoint", run / "fold0.ckpt", "--dataset", run / "desk_dataset.tsv",
                        "--embeddings", workspace["root"] / "emb", "--fold", 0, "--folds", 2)
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["n"] == 12
        fold0 = workspace["report"]["folds"][0]["report"]
        assert report["mse"] == pytest.approx(fold0["mse"])

    def test_predict(self, workspace, tmp_path):
        pairs = pd.read_csv(workspace["run"] / "desk_dataset.tsv", sep="\t").drop(columns="affinity").head(5)
        pairs.to_csv(tmp_path / "pairs.tsv", sep="\t", index=False)
        out = tmp_path / "pred.tsv"
        result = invoke("predict", "--checkpoint", workspace["run"] / "fold1.ckpt", "--pairs", tmp_path / "pairs.tsv",
                        "--embeddings", workspace["root"] / "emb", "--output", out)
        assert result.exit_code == 0, result.stderr
        predictions = pd.read_csv(out, sep="\t")
        assert list(predictions["drug_id"]) == list(pairs["drug_id"])
        assert predictions["prediction"].notna().all()

    def test_prepare_with_check(self, workspace):
        result = invoke("prepare", "--desk", 24, "--config", workspace["config"], "--embeddings",
                        workspace["root"] / "emb", "--stub-embeddings", "--check")
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["records"] == 24
        assert report["embedding_problems"] == {} and report["drug_problems"] == {}
        assert report["cache"]["parses"] == 0

    def test_decompose_arguments(self):
        result = invoke("decompose", "Cc1ccccc1", "CCO")
        assert result.exit_code == 0
        lines = [json.loads(line) for line in result.stdout.splitlines()]
        assert [len(r["clusters"]) for r in lines] == [2, 2]
        assert lines[0]["cluster_kinds"] == ["bond", "ring"]
        assert lines[1]["problems"] == []

    def test_decompose_stdin(self):
        result = invoke("decompose", stdin="c1ccccc1\n\nC\n")
        assert result.exit_code == 0
        assert len(result.stdout.splitlines()) == 2

    def test_decompose_bad_smiles(self):
        assert invoke("decompose", "C1CC").exit_code == 1

    def test_stub_embed_from_fasta(self, tmp_path):
        fasta = tmp_path / "p.fasta"
        fasta.write_text(">P1 kinase\nMKVL\nAGHE\n>P2\nGSHM\n")
        assert read_fasta(str(fasta)) == {"P1": "MKVLAGHE", "P2": "GSHM"}
        result = invoke("stub-embed", "--fasta", fasta, "--out", tmp_path / "emb", "--esm-dim", 6)
        assert result.exit_code == 0
        report = json.loads(result.stdout)
        assert report["written"] == 2 and report["proteins"] == 2
        again = json.loads(invoke("stub-embed", "--fasta", fasta, "--out", tmp_path / "emb", "--esm-dim", 6).stdout)
        assert again["skipped"] == 2

    def test_gradcheck(self):
        result = invoke("gradcheck", "--coords", 1)
        assert result.exit_code == 0, result.stdout
        assert json.loads(result.stdout)["passed"] is True

    def test_main_exit_codes(self, capsys):
        assert main(["decompose", "CC"]) == 0
        assert main(["decompose", "C)C"]) == 1
        assert main(["no-such-command"]) == 2
