# src/core/trainer.py
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import psutil

from data_loaders.data_loader import FoldSplit, PairDataset, kfold_split

from .batch import batch_indices
from .config import TrainConfig
from .errors import HifdtaError
from .fold_statistics import summarize_folds
from .metrics import EvalReport, evaluate_predictions
from .model import HifDTA
from .optim import AdamState, adam_step, clip_grad_norm
from .rng import SeededRng
from .tensor import backward, no_grad

logger = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    """Losses and telemetry for one pass over the training pairs"""
    epoch: int
    lr: float
    train_loss: float
    train_mse: float
    aux_loss: float
    val_loss: float
    seconds: float
    rss_mb: float


@dataclass
class FoldResult:
    fold: int
    train_size: int
    valid_size: int
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    stopped_early: bool = False
    report: Optional[EvalReport] = None
    checkpoint: Optional[str] = None
    predictions: Optional[np.ndarray] = None
    targets: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "fold": self.fold,
            "train_size": self.train_size,
            "valid_size": self.valid_size,
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "epochs_run": len(self.history),
            "stopped_early": self.stopped_early,
            "report": self.report.to_dict() if self.report else None,
            "checkpoint": self.checkpoint,
            "history": [asdict(r) for r in self.history],
        }


@dataclass
class RunArtifacts:
    config: TrainConfig
    folds: List[FoldResult] = field(default_factory=list)
    summary: Dict[str, Dict[str, float]] = field(default_factory=dict)
    wall_seconds: float = 0.0
    peak_rss_mb: float = 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": self.config.seed,
            "ablation": self.config.ablation.to_spec(),
            "architecture": {k: (list(v) if isinstance(v, tuple) else v)
                             for k, v in self.config.architecture().items()},
            "folds": [f.to_dict() for f in self.folds],
            "summary": self.summary,
            "wall_seconds": round(self.wall_seconds, 3),
            "peak_rss_mb": round(self.peak_rss_mb, 1),
        }


def _rss_mb() -> float:
    return psutil.Process().memory_info().rss / 2 ** 20


def predict(model: HifDTA, dataset: PairDataset, batch_size: int = 64,
            indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """Predictions in index order, eval mode, no tape"""
    indices = np.arange(len(dataset)) if indices is None else np.asarray(indices)
    was_training = model.training
    model.eval()
    out = []
    with no_grad():
        for chunk in batch_indices(len(indices), batch_size):
            out.append(model(dataset.batch(indices[chunk], labelled=False)).prediction.data.copy())
    model.train(was_training)
    return np.concatenate(out) if out else np.zeros(0)


def evaluate(model: HifDTA, dataset: PairDataset, batch_size: int = 64,
             indices: Optional[Sequence[int]] = None) -> EvalReport:
    indices = np.arange(len(dataset)) if indices is None else np.asarray(indices)
    return evaluate_predictions(dataset.labels[indices], predict(model, dataset, batch_size, indices))


class Trainer:
    """
    Cross-validated training: Adam on MSE plus the clustering losses, a
    one-step learning-rate drop, early stopping on validation loss and
    best-validation checkpoint selection.
    """

    def __init__(self, config: TrainConfig, run_dir: Optional[Path] = None,
                 on_epoch: Optional[Callable[[int, EpochRecord], None]] = None):
        self.config = config
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.on_epoch = on_epoch
        self.peak_rss_mb = _rss_mb()
        self.model: Optional[HifDTA] = None

    def build_model(self, fold: int) -> HifDTA:
        return HifDTA(self.config, seed=self.config.seed + fold)

    def validation_loss(self, model: HifDTA, dataset: PairDataset, indices: np.ndarray) -> float:
        preds = predict(model, dataset, self.config.batch_size, indices)
        return float(np.mean((preds - dataset.labels[indices]) ** 2))

    def train_step(self, model: HifDTA, dataset: PairDataset, chunk: np.ndarray, optimizer: AdamState):
        model.zero_grad()
        total, mse, out = model.loss(dataset.batch(chunk))
        backward(total)
        params = model.parameters()
        for p in params.values():
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
        if self.config.grad_clip > 0:
            clip_grad_norm(params, self.config.grad_clip)
        adam_step(params, optimizer)
        return float(total.data), float(mse.data), float(out.aux_loss.data)

    def train_fold(self, dataset: PairDataset, train_idx: np.ndarray, valid_idx: np.ndarray,
                   fold: int = 0) -> FoldResult:
        c = self.config
        train_idx = np.asarray(train_idx)
        valid_idx = np.asarray(valid_idx)
        result = FoldResult(fold=fold, train_size=len(train_idx), valid_size=len(valid_idx))
        logger.info(f"🚀 fold {fold}: {len(train_idx)} train / {len(valid_idx)} valid pairs, up to {c.max_epochs} epochs")

        model = self.build_model(fold)
        train_set = dataset.subset(train_idx)
        model.fit_statistics(train_set.drug_samples(), train_set.protein_samples())
        model.train()
        optimizer = AdamState(lr=c.lr_at(1))
        shuffler = SeededRng(c.seed + fold)
        best_state = model.state_dict()

        for epoch in range(1, c.max_epochs + 1):
            started = time.perf_counter()
            optimizer.set_lr(c.lr_at(epoch))
            order = batch_indices(len(train_idx), c.batch_size, shuffler.generator("shuffle", epoch))
            totals, mses, auxes, sizes = [], [], [], []
            for chunk in order:
                total, mse, aux = self.train_step(model, dataset, train_idx[chunk], optimizer)
                totals.append(total)
                mses.append(mse)
                auxes.append(aux)
                sizes.append(len(chunk))
            val_loss = self.validation_loss(model, dataset, valid_idx) if len(valid_idx) else float("nan")
            rss = _rss_mb()
            self.peak_rss_mb = max(self.peak_rss_mb, rss)
            record = EpochRecord(epoch=epoch, lr=optimizer.lr,
                                 train_loss=float(np.average(totals, weights=sizes)),
                                 train_mse=float(np.average(mses, weights=sizes)),
                                 aux_loss=float(np.average(auxes, weights=sizes)),
                                 val_loss=val_loss, seconds=time.perf_counter() - started, rss_mb=rss)
            result.history.append(record)
            if self.on_epoch is not None:
                self.on_epoch(fold, record)
            logger.debug(f"   epoch {epoch}: train {record.train_loss:.4f} (mse {record.train_mse:.4f}) "
                         f"valid {val_loss:.4f} [{record.seconds:.2f}s]")

            monitored = val_loss if len(valid_idx) else record.train_mse
            if monitored < result.best_val_loss:
                result.best_val_loss = monitored
                result.best_epoch = epoch
                best_state = model.state_dict()
            elif epoch - result.best_epoch >= c.patience:
                result.stopped_early = True
                logger.info(f"⏹️ fold {fold}: early stop at epoch {epoch}, best epoch {result.best_epoch}")
                break

        model.load_state_dict(best_state)
        eval_idx = valid_idx if len(valid_idx) else train_idx
        result.predictions = predict(model, dataset, c.batch_size, eval_idx)
        result.targets = dataset.labels[eval_idx]
        try:
            result.report = evaluate_predictions(result.targets, result.predictions)
        except HifdtaError as e:
            logger.warning(f"⚠️ fold {fold}: metrics undefined ({e})")
        if self.run_dir is not None:
            result.checkpoint = str(model.save(self.run_dir / f"fold{fold}.ckpt"))
        if result.report is not None:
            r = result.report
            logger.info(f"✅ fold {fold}: CI {r.ci:.4f}  MSE {r.mse:.4f}  PCC {r.pcc:.4f}  rm² {r.rm2:.4f}")
        self.model = model
        return result

    def cross_validate(self, dataset: PairDataset, split: Optional[FoldSplit] = None,
                       folds: Optional[Sequence[int]] = None) -> RunArtifacts:
        started = time.perf_counter()
        split = split or kfold_split(len(dataset), self.config.folds, self.config.seed)
        artifacts = RunArtifacts(config=self.config)
        for k in (folds if folds is not None else range(split.k)):
            artifacts.folds.append(self.train_fold(dataset, split.train_indices(k), split.valid_indices(k), fold=k))
        artifacts.summary = summarize_folds([f.report for f in artifacts.folds if f.report is not None])
        artifacts.wall_seconds = time.perf_counter() - started
        artifacts.peak_rss_mb = self.peak_rss_mb
        return artifacts
