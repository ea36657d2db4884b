# src/core/metrics.py
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import stats

from .errors import MetricUndefinedError

logger = logging.getLogger(__name__)

# rows of the pairwise comparison processed at once in concordance_index
CI_CHUNK = 2048


@dataclass
class EvalReport:
    """Container for the four regression metrics of one evaluation"""
    ci: float
    rm2: float
    pcc: float
    mse: float
    n: int

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _pair(y, y_hat, minimum: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise MetricUndefinedError(f"length mismatch: {y.shape[0]} targets vs {y_hat.shape[0]} predictions")
    if y.shape[0] < minimum:
        raise MetricUndefinedError(f"need at least {minimum} samples, got {y.shape[0]}")
    if not (np.isfinite(y).all() and np.isfinite(y_hat).all()):
        raise MetricUndefinedError("non-finite targets or predictions")
    return y, y_hat


def mse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def pcc(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat, minimum=2)
    if np.ptp(y) == 0 or np.ptp(y_hat) == 0:
        raise MetricUndefinedError("pcc: zero variance")
    return float(stats.pearsonr(y, y_hat)[0])


def concordance_index(y, y_hat) -> float:
    """
    Fraction of correctly ordered pairs among pairs with distinct true values;
    tied predictions earn half credit.
    """
    y, y_hat = _pair(y, y_hat)
    pairs = 0
    credit = 0.0
    for start in range(0, y.shape[0], CI_CHUNK):
        yi = y[start:start + CI_CHUNK, None]
        fi = y_hat[start:start + CI_CHUNK, None]
        comparable = yi > y[None, :]
        diff = fi - y_hat[None, :]
        pairs += int(comparable.sum())
        credit += float((comparable & (diff > 0)).sum()) + 0.5 * float((comparable & (diff == 0)).sum())
    if pairs == 0:
        raise MetricUndefinedError("concordance index: no comparable pairs")
    return credit / pairs


def r_squared(y, y_hat) -> float:
    return pcc(y, y_hat) ** 2


def r0_squared(y, y_hat) -> float:
    """Determination coefficient of the regression through the origin"""
    y, y_hat = _pair(y, y_hat)
    denom_k = float(np.sum(y_hat * y_hat))
    denom_y = float(np.sum((y - y.mean()) ** 2))
    if denom_k == 0 or denom_y == 0:
        raise MetricUndefinedError("rm2: zero denominator")
    k = float(np.sum(y * y_hat)) / denom_k
    return 1.0 - float(np.sum((y - k * y_hat) ** 2)) / denom_y


def rm_squared(y, y_hat) -> float:
    r2 = r_squared(y, y_hat)
    r02 = r0_squared(y, y_hat)
    return r2 * (1.0 - np.sqrt(abs(r2 - r02)))


def evaluate_predictions(y, y_hat) -> EvalReport:
    y, y_hat = _pair(y, y_hat, minimum=2)
    report = EvalReport(ci=concordance_index(y, y_hat), rm2=float(rm_squared(y, y_hat)),
                        pcc=pcc(y, y_hat), mse=mse(y, y_hat), n=int(y.shape[0]))
    logger.debug(f"📏 n={report.n} ci={report.ci:.4f} mse={report.mse:.4f} pcc={report.pcc:.4f} rm2={report.rm2:.4f}")
    return report
