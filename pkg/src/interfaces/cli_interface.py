# src/interfaces/cli_interface.py
"""
Command-line surface: `hifdta prepare|train|evaluate|predict|gradcheck|decompose|stub-embed`.

Every command prints its report as JSON on stdout and as a rich table on
stderr. Expected failures (HifdtaError) exit with status 1.
"""

import functools
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from chem.isomorphism import graphs_isomorphic
from chem.junction_tree import check_tree, tree_decompose
from chem.smiles_parser import parse_smiles
from chem.smiles_writer import write_smiles
from core.config import TrainConfig, load_config, parse_ablation
from core.errors import HifdtaError, UsageError
from core.fold_statistics import export_fold_statistics
from core.gradcheck import run_gradient_suite, summarize
from core.model import HifDTA
from core.metrics import evaluate_predictions
from core.trainer import Trainer, predict as predict_affinity
from data_loaders.data_loader import (AffinityRecord, inspect_dataset, kfold_split, load_dataset, load_pairs,
                                      unique_drugs, unique_proteins, write_dataset)
from data_loaders.desk_corpus import generate_desk_dataset
from data_loaders.embedding_store import EmbeddingStore, validate_store
from data_loaders.feature_cache import build_pair_dataset
from utils.chart_generator import TrainingChartGenerator

logger = logging.getLogger(__name__)
console = Console(stderr=True)


def handle_errors(command):
    """Log expected failures and exit 1; log unexpected ones with a traceback"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except HifdtaError as e:
            logger.error(f"❌ {e}")
            sys.exit(1)
        except click.exceptions.Exit:
            raise
        except Exception as e:
            logger.exception(f"❌ unexpected failure: {e}")
            sys.exit(1)

    return wrapper


def emit(report: Dict[str, Any], title: str, rows: Optional[List[List[str]]] = None,
         columns: Optional[List[str]] = None) -> None:
    click.echo(json.dumps(report, indent=2, default=_json_default))
    table = Table(title=title)
    if rows is None:
        columns = ["key", "value"]
        rows = [[k, _fmt(v)] for k, v in report.items() if not isinstance(v, (dict, list))]
    for name in columns or []:
        table.add_column(name)
    for row in rows:
        table.add_row(*row)
    console.print(table)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _json_default(value: Any):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def resolve_config(config_path: Optional[str], **overrides: Any) -> TrainConfig:
    """Config file (if any) then CLI flags on top"""
    config = load_config(config_path) if config_path else TrainConfig()
    ablation = overrides.pop("ablation", None)
    if ablation is not None:
        overrides["ablation"] = parse_ablation(ablation)
    return config.with_overrides(**overrides)


def resolve_records(dataset: Optional[str], config: TrainConfig, desk_pairs: Optional[int]) -> List[AffinityRecord]:
    if dataset:
        return load_dataset(dataset, transform=config.pkd_transform)
    if desk_pairs:
        return generate_desk_dataset(desk_pairs, seed=config.seed, n_proteins=max(12, desk_pairs // 20), raw_kd=False)
    raise UsageError("pass --dataset <tsv> or --desk <pairs>")


def metric_rows(reports: Dict[str, Dict[str, Any]]) -> List[List[str]]:
    return [[name, *(_fmt(r.get(m)) for m in ("ci", "mse", "pcc", "rm2")), str(r.get("n", ""))]
            for name, r in reports.items()]


# --- shared options ---

def dataset_options(func):
    func = click.option("--dataset", type=click.Path(exists=True, dir_okay=False), help="TSV: drug_id smiles protein_id sequence affinity")(func)
    func = click.option("--embeddings", type=click.Path(file_okay=False), default="embeddings", show_default=True, help="directory of <id>.emb / <id>.cmap")(func)
    func = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="key = value config file")(func)
    func = click.option("--seed", type=int, help="run seed")(func)
    func = click.option("--stub-embeddings", is_flag=True, help="generate deterministic stub embeddings for missing proteins")(func)
    func = click.option("--pkd/--no-pkd", "pkd_transform", default=None, help="treat affinities as K_d in nM and convert to pK_d")(func)
    func = click.option("--cache-dir", type=click.Path(file_okay=False), help="feature cache root")(func)
    return func


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
@click.option("-q", "--quiet", is_flag=True, help="warnings and errors only")
def cli(verbose: bool, quiet: bool):
    """HiF-DTA drug–target affinity toolkit"""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif quiet:
        logging.getLogger().setLevel(logging.WARNING)


@cli.command()
@dataset_options
@click.option("--desk", "desk_pairs", type=int, help="generate this many synthetic pairs instead of reading --dataset")
@click.option("--check", is_flag=True, help="round-trip every SMILES through the writer and check the junction tree")
@handle_errors
def prepare(dataset, embeddings, config_path, seed, stub_embeddings, pkd_transform, cache_dir, desk_pairs, check):
    """Ingest a dataset, resolve embeddings and fill the feature cache"""
    config = resolve_config(config_path, seed=seed, pkd_transform=pkd_transform, cache_dir=cache_dir)
    records = resolve_records(dataset, config, desk_pairs)
    stats = inspect_dataset(records)
    store = EmbeddingStore(embeddings, config.esm_dim)
    built = build_pair_dataset(records, config, store, stub_missing=stub_embeddings)
    report: Dict[str, Any] = {**stats.to_dict(), "cache": built.cache_stats.to_dict(), "embeddings": str(store.root)}
    if check:
        problems = validate_store(store, unique_proteins(records))
        failures = {}
        for drug_id, smiles in unique_drugs(records).items():
            graph = parse_smiles(smiles)
            issues = check_tree(graph, tree_decompose(graph))
            if not graphs_isomorphic(graph, parse_smiles(write_smiles(graph))):
                issues.append("SMILES round trip changed the graph")
            if issues:
                failures[drug_id] = issues
        report["embedding_problems"] = problems
        report["drug_problems"] = failures
        if problems or failures:
            logger.warning(f"⚠️ check found {len(problems)} embedding and {len(failures)} drug problem(s)")
    emit(report, "Dataset")


@cli.command()
@dataset_options
@click.option("--desk", "desk_pairs", type=int, help="train on this many synthetic pairs")
@click.option("--folds", type=int, help="number of CV folds")
@click.option("--fold", "only_folds", type=int, multiple=True, help="run only these fold indices")
@click.option("--epochs", "max_epochs", type=int, help="maximum epochs per fold")
@click.option("--patience", type=int, help="early-stopping patience")
@click.option("--hidden", "hidden_channels", type=int, help="hidden width d")
@click.option("--batch-size", type=int)
@click.option("--lr", type=float)
@click.option("--ablation", type=str, help="e.g. drug_global_only,scales=atom+mol,fusion=concat")
@click.option("--workers", type=int, help="featurization threads")
@click.option("--out", type=click.Path(file_okay=False), help="run directory (default <results_dir>/run_<timestamp>)")
@click.option("--plot", is_flag=True, help="save loss curves and scatter charts")
@handle_errors
def train(dataset, embeddings, config_path, seed, stub_embeddings, pkd_transform, cache_dir, desk_pairs,
          folds, only_folds, max_epochs, patience, hidden_channels, batch_size, lr, ablation, workers, out, plot):
    """Cross-validated training with best-validation checkpoints per fold"""
    config = resolve_config(config_path, seed=seed, pkd_transform=pkd_transform, cache_dir=cache_dir, folds=folds,
                            max_epochs=max_epochs, patience=patience, hidden_channels=hidden_channels,
                            batch_size=batch_size, lr=lr, ablation=ablation, workers=workers)
    records = resolve_records(dataset, config, desk_pairs)
    data = build_pair_dataset(records, config, EmbeddingStore(embeddings, config.esm_dim), stub_missing=stub_embeddings)
    run_dir = Path(out) if out else Path(config.results_dir) / f"run_{time.strftime('%Y%m%d_%H%M%S')}"
    run_dir.mkdir(parents=True, exist_ok=True)
    if desk_pairs and not dataset:
        write_dataset(records, run_dir / "desk_dataset.tsv")

    split = kfold_split(len(data), config.folds, config.seed)
    bad = [k for k in only_folds if not 0 <= k < split.k]
    if bad:
        raise UsageError(f"--fold {bad[0]} is outside 0..{split.k - 1}")
    trainer = Trainer(config, run_dir=run_dir)
    artifacts = trainer.cross_validate(data, split, folds=list(only_folds) or None)
    report = artifacts.to_dict()
    (run_dir / "run.json").write_text(json.dumps(report, indent=2, default=_json_default))
    reports = [f.report for f in artifacts.folds if f.report is not None]
    export_fold_statistics(reports, run_dir, stem="fold_statistics")

    if plot:
        charts = TrainingChartGenerator(run_dir)
        charts.loss_curves({f.fold: [vars(r) for r in f.history] for f in artifacts.folds}, stem="loss_curves")
        targets = np.concatenate([f.targets for f in artifacts.folds if f.targets is not None])
        preds = np.concatenate([f.predictions for f in artifacts.folds if f.predictions is not None])
        charts.prediction_scatter(targets, preds, stem="prediction_scatter")
        if len(reports) > 1:
            charts.fold_metrics(artifacts.summary, stem="fold_metrics")

    rows = {f"fold {f.fold}": f.report.to_dict() for f in artifacts.folds if f.report is not None}
    rows.update({"mean": {m: s["mean"] for m, s in artifacts.summary.items()},
                 "std": {m: s["std"] for m, s in artifacts.summary.items()}})
    emit({**report, "run_dir": str(run_dir)}, f"Cross-validation ({run_dir})", metric_rows(rows),
         ["", "CI", "MSE", "PCC", "rm²", "n"])


@cli.command()
@dataset_options
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--fold", type=int, help="evaluate only this held-out fold of the seeded split")
@click.option("--folds", type=int, help="number of folds in the split")
@handle_errors
def evaluate(dataset, embeddings, config_path, seed, stub_embeddings, pkd_transform, cache_dir, checkpoint, fold, folds):
    """Metrics of a checkpoint on a dataset or on one fold of it"""
    model = HifDTA.from_checkpoint(checkpoint, load_config(config_path) if config_path else None)
    config = model.config.with_overrides(seed=seed, pkd_transform=pkd_transform, cache_dir=cache_dir, folds=folds)
    if not dataset:
        raise UsageError("evaluate needs --dataset")
    records = load_dataset(dataset, transform=config.pkd_transform)
    data = build_pair_dataset(records, config, EmbeddingStore(embeddings, config.esm_dim), stub_missing=stub_embeddings)
    indices = kfold_split(len(data), config.folds, config.seed).valid_indices(fold) if fold is not None else np.arange(len(data))
    preds = predict_affinity(model, data, config.batch_size, indices)
    report = evaluate_predictions(data.labels[indices], preds)
    emit({"checkpoint": checkpoint, "fold": fold, **report.to_dict()}, "Evaluation",
         metric_rows({Path(checkpoint).name: report.to_dict()}), ["", "CI", "MSE", "PCC", "rm²", "n"])


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", required=True, type=click.Path(exists=True, dir_okay=False), help="TSV: drug_id smiles protein_id sequence")
@click.option("--embeddings", type=click.Path(file_okay=False), default="embeddings", show_default=True)
@click.option("--stub-embeddings", is_flag=True)
@click.option("--output", type=click.Path(dir_okay=False), help="write TSV here instead of stdout")
@handle_errors
def predict(checkpoint, pairs, embeddings, stub_embeddings, output):
    """Affinity per input line, echoed with the input ids"""
    model = HifDTA.from_checkpoint(checkpoint)
    config = model.config
    frame = load_pairs(pairs)
    records = [AffinityRecord(r.drug_id, r.smiles, r.protein_id, r.sequence, 0.0) for r in frame.itertuples(index=False)]
    data = build_pair_dataset(records, config, EmbeddingStore(embeddings, config.esm_dim), stub_missing=stub_embeddings)
    frame["prediction"] = predict_affinity(model, data, config.batch_size)
    text = frame.to_csv(sep="\t", index=False, float_format="%.6f")
    if output:
        Path(output).write_text(text)
        logger.info(f"💾 {len(frame)} predictions written to {output}")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tolerance", type=float, default=1e-5, show_default=True)
@click.option("--coords", type=int, default=6, show_default=True, help="coordinates probed per parameter (0 = all)")
@handle_errors
def gradcheck(seed, tolerance, coords):
    """Finite-difference check of every composed module and the full loss"""
    started = time.perf_counter()
    results = run_gradient_suite(seed=seed, max_coords=coords or None)
    report = summarize(results, tolerance)
    report["seconds"] = round(time.perf_counter() - started, 2)
    rows = [[c["name"], f"{c['max_rel_error']:.2e}", str(c["coords"]), str(c["worst_param"]),
             "✅" if c["passed"] else "❌"] for c in report["checks"]]
    emit(report, "Gradient check", rows, ["module", "max rel err", "coords", "worst parameter", ""])
    if not report["passed"]:
        sys.exit(1)


def decomposition_record(smiles: str) -> Dict[str, Any]:
    graph = parse_smiles(smiles)
    tree = tree_decompose(graph)
    return {"smiles": smiles, "canonical": write_smiles(graph), **graph.summary(), **tree.to_dict(),
            "cluster_kinds": list(tree.cluster_kinds), "problems": check_tree(graph, tree)}


@cli.command()
@click.argument("smiles", nargs=-1)
@handle_errors
def decompose(smiles):
    """Junction-tree decomposition; SMILES from arguments or one per stdin line, one JSON object per line out"""
    inputs = list(smiles) or [line.strip() for line in click.get_text_stream("stdin") if line.strip()]
    if not inputs:
        raise UsageError("no SMILES given")
    table = Table(title="Junction trees")
    for name in ("smiles", "atoms", "bonds", "clusters", "tree edges", "problems"):
        table.add_column(name)
    for text in inputs:
        record = decomposition_record(text)
        click.echo(json.dumps(record, default=_json_default))
        table.add_row(text, str(record["atoms"]), str(record["bonds"]), str(len(record["clusters"])),
                      str(len(record["tree_edges"])), "; ".join(record["problems"]) or "-")
    console.print(table)


@cli.command("stub-embed")
@click.option("--fasta", type=click.Path(exists=True, dir_okay=False), help="FASTA-like file: >id then sequence lines")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), help="take proteins from a dataset TSV")
@click.option("--out", "embeddings", type=click.Path(file_okay=False), default="embeddings", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--esm-dim", type=int, default=1280, show_default=True)
@click.option("--overwrite", is_flag=True)
@handle_errors
def stub_embed(fasta, dataset, embeddings, seed, esm_dim, overwrite):
    """Deterministic stand-in embeddings and contact maps"""
    if fasta:
        proteins = read_fasta(fasta)
    elif dataset:
        proteins = unique_proteins(load_dataset(dataset))
    else:
        raise UsageError("pass --fasta or --dataset")
    store = EmbeddingStore(embeddings, esm_dim)
    written = store.stub(proteins, seed=seed, overwrite=overwrite)
    emit({"written": len(written), "skipped": len(proteins) - len(written), **store.inventory()}, "Stub embeddings")


def read_fasta(path: str) -> Dict[str, str]:
    proteins: Dict[str, str] = {}
    current = None
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            current = line[1:].split()[0]
            proteins[current] = ""
        elif current is None:
            raise UsageError(f"{path}: sequence before the first '>' header")
        else:
            proteins[current] += line.upper()
    return proteins


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cli.main(args=argv, prog_name="hifdta", standalone_mode=False)
    except click.exceptions.Abort:
        console.print("interrupted")
        return 130
    except click.exceptions.ClickException as e:
        e.show()
        return e.exit_code
    except SystemExit as e:
        return int(e.code or 0)
    return 0
