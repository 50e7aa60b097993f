"""
Tests for the VaR backtests
"""

import numpy as np
import pytest

from risk.backtest import (
    backtest, duration_test, failures_test, hit_durations, hit_sequence, integrated_var_change,
)
from utils.errors import DegenerateDataError


def _hits(T, positions):
    h = np.zeros(T, dtype=bool)
    h[list(positions)] = True
    return h


class TestHits:

    def test_strict_inequality(self):
        hits = hit_sequence([-2.0, -1.0, 0.5], [-1.0, -1.0, -1.0])
        assert hits.tolist() == [True, False, False]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hit_sequence([1.0, 2.0], [0.0])


class TestFailures:

    @pytest.mark.parametrize("x, p_value", [(14, 0.23), (11, 0.75), (12, 0.54)])
    def test_reference_values(self, x, p_value):
        result = failures_test(_hits(1000, range(x)), 0.01)
        assert result.p_value == pytest.approx(p_value, abs=0.01)

    def test_statistic_at_fourteen_hits(self):
        assert failures_test(_hits(1000, range(14)), 0.01).statistic == pytest.approx(1.437, abs=0.002)

    def test_expected_count_gives_zero(self):
        result = failures_test(_hits(1000, range(10)), 0.01)
        assert result.statistic == pytest.approx(0.0, abs=1e-9)
        assert result.p_value == pytest.approx(1.0)

    def test_no_hits_is_finite(self):
        result = failures_test(np.zeros(500, dtype=bool), 0.01)
        assert np.isfinite(result.statistic)
        assert result.p_value < 1.0

    def test_order_does_not_matter(self, rng):
        hits = rng.random(800) < 0.03
        shuffled = rng.permutation(hits)
        assert failures_test(hits, 0.01).statistic == pytest.approx(failures_test(shuffled, 0.01).statistic)

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            failures_test(np.zeros(10, dtype=bool), 1.0)


class TestDurations:

    def test_censored_spells_at_both_ends(self):
        durations, censored = hit_durations([False, True, False, False, True, False])
        assert durations.tolist() == [2.0, 3.0, 1.0]
        assert censored.tolist() == [True, False, True]

    def test_no_censoring_when_the_ends_are_hits(self):
        durations, censored = hit_durations([True, False, True])
        assert durations.tolist() == [2.0]
        assert not censored.any()

    def test_periodic_hits_are_rejected(self):
        hits = _hits(1000, range(99, 1000, 100))
        assert duration_test(hits).p_value <= 0.05

    def test_single_hit_is_not_applicable(self):
        result = duration_test(_hits(250, [100]))
        assert result.status == "not_applicable"
        assert np.isnan(result.p_value)

    def test_exponential_spacing_is_not_rejected(self):
        gen = np.random.default_rng(3)
        hits = gen.random(5000) < 0.05
        assert duration_test(hits).p_value > 0.01

    def test_size_under_independent_hits(self):
        """Rejection rate at 5% for iid Bernoulli(0.01) hits over 1000 days

        The chi-square approximation over-rejects somewhat in short samples (around 7%
        at this setting, above 10% at T=500 or with 5% hits), so the setting is pinned.
        """
        gen = np.random.default_rng(0)
        results = [duration_test(gen.random(1000) < 0.01) for _ in range(500)]
        p_values = np.array([r.p_value for r in results if r.status == "ok"])
        assert len(p_values) >= 490
        assert 0.02 <= np.mean(p_values < 0.05) <= 0.10

    def test_clustering_matters_but_not_for_the_count(self, rng):
        clustered = np.zeros(1000, dtype=bool)
        for start in range(40, 1000, 100):
            clustered[start:start + 5] = True
        shuffled = rng.permutation(clustered)
        tight, spread = duration_test(clustered), duration_test(shuffled)
        assert tight.p_value < 0.01
        assert tight.statistic > spread.statistic
        assert failures_test(clustered, 0.05).statistic == failures_test(shuffled, 0.05).statistic


class TestIntegratedChange:

    def test_flat_path_at_the_quantile(self):
        assert integrated_var_change(np.full(10, -2.0), -2.0) == pytest.approx(0.0)

    def test_half_the_quantile(self):
        assert integrated_var_change(np.full(10, -1.0), -2.0) == pytest.approx(-50.0)

    def test_zero_quantile(self):
        with pytest.raises(DegenerateDataError):
            integrated_var_change(np.full(10, -1.0), 0.0)


class TestReport:

    def test_counts_and_serialization(self):
        returns = np.array([-3.0, 0.1, 0.2, -0.1, 0.4])
        report = backtest("constant", returns, np.full(5, -1.0), 0.05, -1.0)
        assert report.exceedances == 1
        assert report.expected_exceedances == pytest.approx(0.25)
        out = report.to_dict()
        assert out["duration_status"] == "not_applicable"
        assert out["duration_p"] is None
        assert out["coefficient"] is None
        assert report.rejects()["duration"] is False

    def test_rejects_uses_the_level(self):
        report = backtest("constant", np.full(100, -5.0), np.full(100, -1.0), 0.01, -1.0)
        assert report.rejects()["failures"] is True
