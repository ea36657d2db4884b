# src/utils/chart_generator.py
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)


class TrainingChartGenerator:
    """
    Charts for a training run: per-fold loss curves, predicted-vs-true
    scatter and a per-metric box plot over folds. PNGs go to `results_dir`.
    """

    def __init__(self, results_dir: Union[str, Path] = "results"):
        self.results_dir = Path(results_dir)
        plt.style.use("default")
        plt.rcParams["figure.figsize"] = (12, 8)
        plt.rcParams["font.size"] = 12
        plt.rcParams["axes.grid"] = True
        plt.rcParams["grid.alpha"] = 0.3

    def _save(self, fig, stem: str) -> Path:
        self.results_dir.mkdir(parents=True, exist_ok=True)
        path = self.results_dir / f"{stem}.png"
        fig.tight_layout()
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        logger.info(f"📈 chart saved: {path}")
        return path

    def loss_curves(self, histories: Dict[int, Sequence[Dict[str, float]]], stem: Optional[str] = None) -> Path:
        """histories: fold → epoch records (dicts with epoch, train_mse, val_loss, lr)"""
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(12, 10), sharex=True)
        colors = plt.cm.viridis(np.linspace(0, 0.9, max(len(histories), 1)))
        for color, (fold, history) in zip(colors, sorted(histories.items())):
            epochs = [r["epoch"] for r in history]
            ax1.plot(epochs, [r["train_mse"] for r in history], "-", color=color, linewidth=2, label=f"fold {fold}")
            ax2.plot(epochs, [r["val_loss"] for r in history], "-", color=color, linewidth=2, label=f"fold {fold}")
            best = int(np.nanargmin([r["val_loss"] for r in history])) if history else None
            if best is not None and np.isfinite(history[best]["val_loss"]):
                ax2.plot(epochs[best], history[best]["val_loss"], "o", color=color, markersize=7)
        if histories:
            decay = next((r["epoch"] for h in histories.values() for r in h[1:] if r["lr"] != h[0]["lr"]), None)
            if decay is not None:
                for ax in (ax1, ax2):
                    ax.axvline(x=decay, color="gray", linestyle="--", alpha=0.7, label="lr decay")
        ax1.set_title("Training MSE", fontsize=14, fontweight="bold")
        ax1.set_ylabel("MSE")
        ax1.legend()
        ax2.set_title("Validation MSE (dot = selected checkpoint)", fontsize=14, fontweight="bold")
        ax2.set_xlabel("Epoch")
        ax2.set_ylabel("MSE")
        ax2.legend()
        return self._save(fig, stem or f"loss_curves_{datetime.now().strftime('%Y%m%d_%H%M%S')}")

    def prediction_scatter(self, targets: Sequence[float], predictions: Sequence[float],
                           title: str = "Predicted vs measured affinity", stem: Optional[str] = None) -> Path:
        y = np.asarray(targets, dtype=np.float64)
        f = np.asarray(predictions, dtype=np.float64)
        fig, ax = plt.subplots(figsize=(8, 8))
        ax.scatter(y, f, s=14, alpha=0.6, color="steelblue", edgecolors="none")
        if y.size:
            low, high = float(min(y.min(), f.min())), float(max(y.max(), f.max()))
            ax.plot([low, high], [low, high], "k--", alpha=0.6, label="y = x")
            if y.size > 1 and np.ptp(y) > 0:
                slope, intercept = np.polyfit(y, f, 1)
                ax.plot([low, high], [slope * low + intercept, slope * high + intercept], "r-", alpha=0.7,
                        label=f"fit: {slope:.2f}x + {intercept:.2f}")
            ax.legend()
        ax.set_title(title, fontsize=14, fontweight="bold")
        ax.set_xlabel("Measured")
        ax.set_ylabel("Predicted")
        return self._save(fig, stem or f"prediction_scatter_{datetime.now().strftime('%Y%m%d_%H%M%S')}")

    def fold_metrics(self, summary: Dict[str, Dict[str, object]], stem: Optional[str] = None) -> Path:
        metrics: List[str] = [m for m, s in summary.items() if s.get("values")]
        fig, axes = plt.subplots(1, max(len(metrics), 1), figsize=(4 * max(len(metrics), 1), 6))
        axes = np.atleast_1d(axes)
        for ax, metric in zip(axes, metrics):
            values = summary[metric]["values"]
            bp = ax.boxplot([values], patch_artist=True)
            for patch in bp["boxes"]:
                patch.set_facecolor("lightblue")
                patch.set_alpha(0.7)
            ax.scatter(np.ones(len(values)), values, color="navy", zorder=3, s=18)
            ax.set_title(f"{metric.upper()}\n{summary[metric]['mean']:.4f} ± {summary[metric]['std']:.4f}")
            ax.set_xticks([])
        return self._save(fig, stem or f"fold_metrics_{datetime.now().strftime('%Y%m%d_%H%M%S')}")
