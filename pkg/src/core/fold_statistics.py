# src/core/fold_statistics.py
import csv
import json
import logging
import statistics
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .metrics import EvalReport

logger = logging.getLogger(__name__)

METRICS = ("ci", "mse", "pcc", "rm2")


@dataclass
class MetricSummary:
    """Spread of one metric over the cross-validation folds"""
    metric: str
    values: List[float]
    mean: float
    std_deviation: float
    minimum: float
    maximum: float
    confidence_interval: Tuple[float, float]

    def to_dict(self) -> Dict[str, object]:
        return {
            "mean": self.mean,
            "std": self.std_deviation,
            "min": self.minimum,
            "max": self.maximum,
            "ci95_low": self.confidence_interval[0],
            "ci95_high": self.confidence_interval[1],
            "values": list(self.values),
        }


def summarize_metric(metric: str, values: Sequence[float]) -> MetricSummary:
    values = [float(v) for v in values]
    if not values:
        nan = float("nan")
        return MetricSummary(metric, [], nan, nan, nan, nan, (nan, nan))
    mean = statistics.mean(values)
    std_dev = statistics.stdev(values) if len(values) > 1 else 0.0
    # 95% interval (normal approximation)
    margin = 1.96 * std_dev / len(values) ** 0.5
    return MetricSummary(metric=metric, values=values, mean=mean, std_deviation=std_dev,
                         minimum=min(values), maximum=max(values),
                         confidence_interval=(mean - margin, mean + margin))


def summarize_folds(reports: Sequence[EvalReport]) -> Dict[str, Dict[str, object]]:
    return {m: summarize_metric(m, [getattr(r, m) for r in reports]).to_dict() for m in METRICS}


def export_fold_statistics(reports: Sequence[EvalReport], directory: Union[str, Path],
                           stem: Optional[str] = None, extra: Optional[Dict[str, object]] = None) -> Dict[str, Path]:
    """Write per-fold values as CSV and the summary as JSON; returns both paths"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or f"fold_statistics_{datetime.now().strftime('%Y%m%d_%H%M%S')}"

    csv_path = directory / f"{stem}.csv"
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["fold", "n", *METRICS])
        for fold, report in enumerate(reports):
            writer.writerow([fold, report.n, *(f"{getattr(report, m):.10g}" for m in METRICS)])

    json_path = directory / f"{stem}.json"
    payload = {"folds": len(reports), "timestamp": datetime.now().isoformat(),
               "summary": summarize_folds(reports), **(extra or {})}
    with open(json_path, "w") as handle:
        json.dump(payload, handle, indent=2)

    logger.info(f"💾 fold statistics written to {csv_path.name} and {json_path.name}")
    return {"csv": csv_path, "json": json_path}
