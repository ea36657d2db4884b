# tests/test_metrics.py
import itertools

import numpy as np
import pytest

from core.errors import MetricUndefinedError
from core.metrics import CI_CHUNK, concordance_index, evaluate_predictions, mse, pcc, r0_squared, rm_squared


def brute_force_ci(y, f):
    pairs, credit = 0, 0.0
    for i, j in itertools.permutations(range(len(y)), 2):
        if y[i] > y[j]:
            pairs += 1
            credit += 1.0 if f[i] > f[j] else (0.5 if f[i] == f[j] else 0.0)
    return credit / pairs


def reference_rm2(y, f):
    r = np.corrcoef(y, f)[0, 1]
    k = np.dot(y, f) / np.dot(f, f)
    r0 = 1.0 - np.sum((y - k * f) ** 2) / np.sum((y - np.mean(y)) ** 2)
    return r * r * (1.0 - np.sqrt(np.abs(r * r - r0)))


class TestConcordance:
    def test_perfect_and_reversed(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        assert concordance_index(y, y) == 1.0
        assert concordance_index(y, -y) == 0.0

    def test_tied_predictions_get_half(self):
        assert concordance_index([1.0, 2.0], [5.0, 5.0]) == 0.5

    def test_tied_targets_are_skipped(self):
        assert concordance_index([1.0, 1.0, 2.0], [3.0, 0.0, 1.0]) == pytest.approx(0.5)

    def test_matches_brute_force(self, rng):
        y = np.round(rng.normal(size=40), 1)
        f = np.round(y + rng.normal(scale=0.5, size=40), 1)
        assert concordance_index(y, f) == pytest.approx(brute_force_ci(y, f))

    def test_chunking_is_invisible(self, rng):
        n = CI_CHUNK + 37
        y = rng.normal(size=n)
        f = y + rng.normal(size=n)
        comparable = y[:, None] > y[None, :]
        expected = np.sum(comparable & (f[:, None] > f[None, :])) / np.sum(comparable)
        assert concordance_index(y, f) == pytest.approx(expected, rel=1e-12)

    def test_no_comparable_pairs(self):
        with pytest.raises(MetricUndefinedError):
            concordance_index([2.0, 2.0], [1.0, 3.0])


class TestRegressionMetrics:
    def test_mse(self):
        assert mse([1.0, 2.0, 3.0], [1.0, 2.0, 5.0]) == pytest.approx(4 / 3)

    def test_pcc(self):
        assert pcc([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]) == pytest.approx(1.0)
        assert pcc([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-1.0)
        with pytest.raises(MetricUndefinedError, match="variance"):
            pcc([1.0, 2.0, 3.0], [4.0, 4.0, 4.0])

    def test_rm2_against_reference(self, rng):
        y = rng.normal(7.0, 1.0, size=50)
        f = y + rng.normal(0.0, 0.4, size=50)
        assert rm_squared(y, f) == pytest.approx(reference_rm2(y, f), rel=1e-10)

    def test_rm2_perfect_fit(self):
        y = np.array([5.0, 6.0, 7.5, 9.0])
        assert r0_squared(y, y) == pytest.approx(1.0)
        assert rm_squared(y, y) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(MetricUndefinedError, match="length"):
            mse([1.0, 2.0], [1.0])

    def test_report(self, rng):
        y = rng.normal(size=30)
        report = evaluate_predictions(y, y + 0.1)
        assert report.n == 30
        assert report.ci == 1.0
        assert report.mse == pytest.approx(0.01)
        assert set(report.to_dict()) == {"ci", "rm2", "pcc", "mse", "n"}

    @pytest.mark.parametrize("metric", [mse, pcc, concordance_index, rm_squared])
    @pytest.mark.parametrize("y, y_hat", [
        ([1.0, 2.0, np.nan], [1.0, 2.0, 3.0]),
        ([1.0, 2.0, 3.0], [1.0, np.inf, 3.0]),
    ])
    def test_non_finite_inputs(self, metric, y, y_hat):
        with pytest.raises(MetricUndefinedError, match="non-finite"):
            metric(y, y_hat)

    def test_report_needs_two_samples(self):
        with pytest.raises(MetricUndefinedError):
            evaluate_predictions([1.0], [1.0])
