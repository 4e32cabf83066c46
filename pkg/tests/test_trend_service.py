import io
import math

import numpy as np
import pytest
from scipy.stats import norm

from schemas.centrality_schemas import CentralityPoint, CentralitySeries, Month
from schemas.trend_schemas import DeclineConfig, SlopeSign, TrendMetric, TrendWindow
from services.centrality_service import SeriesStore
from services.errors import TooFewPoints
from services.testkit_service import oracle_mk_exact
from services.trend_service import (
    VerdictStore,
    decline_verdicts,
    is_in_decline,
    mann_kendall,
    read_rows,
    sen_slope,
    verdict_rows,
    write_rows,
)

ANCHOR = Month(2020, 12)


def series(percentiles, package="pkg", last=ANCHOR) -> CentralitySeries:
    """Ряд, заканчивающийся в месяце last"""
    first = last.shift(-(len(percentiles) - 1))
    return CentralitySeries(
        package=package,
        points=[
            CentralityPoint(
                month=first.shift(i),
                score=1.0 - value,
                rank=i + 1,
                percentile=value,
            )
            for i, value in enumerate(percentiles)
        ],
    )


class TestMannKendall:
    def test_strictly_decreasing(self):
        result = mann_kendall([8, 7, 6, 5, 4, 3, 2, 1])
        assert result.s_statistic == -28
        assert result.p_value == pytest.approx(1 / math.factorial(8))
        assert result.p_value < 0.05

    def test_constant_series(self):
        result = mann_kendall([3.0] * 7)
        assert result.s_statistic == 0
        assert result.variance == 0
        assert result.p_value == 1.0

    def test_known_series_matches_enumeration(self):
        values = [5, 4, 6, 3, 2, 1]
        result = mann_kendall(values)
        assert result.s_statistic == -11
        assert result.p_value == pytest.approx(oracle_mk_exact(values), abs=1e-12)

    def test_exact_matches_enumeration_with_ties(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(3, 9))
            values = rng.integers(0, 4, size=n).tolist()
            assert mann_kendall(values).p_value == pytest.approx(
                oracle_mk_exact(values), abs=1e-12
            )

    @pytest.mark.parametrize("n", [9, 10])
    def test_exact_matches_enumeration_at_largest_sizes(self, n):
        rng = np.random.default_rng(n)
        for _ in range(8):
            values = rng.integers(0, 3, size=n).tolist()
            assert mann_kendall(values).p_value == pytest.approx(
                oracle_mk_exact(values), abs=1e-12
            )

    def test_exact_boundary_without_ties(self):
        values = [10, 9, 8, 7, 6, 5, 4, 3, 1, 2]
        result = mann_kendall(values)
        assert result.s_statistic == -43
        # S <= -43: убывающая и девять с одной соседней инверсией
        assert result.p_value == pytest.approx(10 / math.factorial(10), rel=1e-9)

    @pytest.mark.slow
    @pytest.mark.parametrize("n", [9, 10])
    def test_exact_matches_enumeration_without_ties(self, n):
        values = np.random.default_rng(n).permutation(n).tolist()
        assert mann_kendall(values).p_value == pytest.approx(
            oracle_mk_exact(values), abs=1e-12
        )

    def test_normal_approximation(self):
        values = [12, 11, 13, 10, 9, 9, 8, 7, 8, 6, 5, 4]
        result = mann_kendall(values)
        expected = norm.cdf((result.s_statistic + 1) / math.sqrt(result.variance))
        assert result.p_value == pytest.approx(expected)
        assert result.s_statistic < 0

    def test_long_constant_series(self):
        assert mann_kendall([1.0] * 15).p_value == 1.0

    def test_reversal_flips_statistic(self):
        values = [1, 3, 2, 5, 4, 4, 6]
        reversed_result = mann_kendall(values[::-1])
        assert mann_kendall(values).s_statistic == -reversed_result.s_statistic

    def test_monotone_transform_invariance(self):
        values = [0.3, 0.1, 0.4, 0.2, 0.05, 0.01, 0.02]
        plain = mann_kendall(values)
        transformed = mann_kendall(np.exp(values) * 3 + 1)
        assert transformed.s_statistic == plain.s_statistic
        assert transformed.p_value == plain.p_value

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            mann_kendall([1.0, 2.0])

    def test_sen_slope(self):
        assert sen_slope([1.0, 3.0, 5.0, 7.0]) == pytest.approx(2.0)
        assert sen_slope([4.0]) == 0.0


class TestDeclineVerdicts:
    def test_rising_percentile_is_decline(self):
        verdicts = decline_verdicts(
            series([0.1 + 0.05 * i for i in range(12)]), DeclineConfig(), ANCHOR
        )
        assert set(verdicts) == set(TrendWindow)
        assert verdicts[TrendWindow.SIX_MONTHS].n == 6
        assert verdicts[TrendWindow.ONE_YEAR].n == 12
        assert all(
            v.decline and v.slope_sign == SlopeSign.DOWN for v in verdicts.values()
        )
        assert is_in_decline(verdicts)

    def test_improving_package_is_not_in_decline(self):
        verdicts = decline_verdicts(
            series([0.9 - 0.05 * i for i in range(12)]), DeclineConfig(), ANCHOR
        )
        assert all(v.slope_sign == SlopeSign.UP for v in verdicts.values())
        assert not is_in_decline(verdicts)

    def test_short_history_is_insufficient(self):
        short = series([0.1, 0.2, 0.3, 0.4])
        verdicts = decline_verdicts(short, DeclineConfig(), ANCHOR)
        assert all(v.insufficient_data and not v.decline for v in verdicts.values())
        assert not is_in_decline(verdicts)

    def test_unknown_package(self):
        verdicts = decline_verdicts(None, DeclineConfig(), ANCHOR, package="ghost")
        assert all(v.package == "ghost" and v.n == 0 for v in verdicts.values())
        assert not is_in_decline(verdicts)

    def test_windows_anchor_at_cutoff_month(self):
        # рост после месяца cutoff не должен влиять на вердикт
        values = [0.1 + 0.05 * i for i in range(8)] + [0.01] * 4
        verdicts = decline_verdicts(
            series(values, last=ANCHOR.shift(4)), DeclineConfig(), ANCHOR
        )
        assert verdicts[TrendWindow.SIX_MONTHS].n == 6
        assert verdicts[TrendWindow.LIFETIME].n == 8
        assert verdicts[TrendWindow.SIX_MONTHS].decline

    def test_recent_decline_after_long_growth(self):
        values = [0.9 - 0.02 * i for i in range(30)] + [0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        verdicts = decline_verdicts(series(values), DeclineConfig(), ANCHOR)
        assert verdicts[TrendWindow.SIX_MONTHS].decline
        assert not verdicts[TrendWindow.LIFETIME].decline
        assert is_in_decline(verdicts)

    def test_score_metric(self):
        config = DeclineConfig(metric=TrendMetric.SCORE)
        verdicts = decline_verdicts(
            series([0.1 + 0.05 * i for i in range(12)]), config, ANCHOR
        )
        assert verdicts[TrendWindow.ONE_YEAR].decline

    def test_min_points(self):
        config = DeclineConfig(min_points=8)
        verdicts = decline_verdicts(
            series([0.1 + 0.05 * i for i in range(12)]), config, ANCHOR
        )
        assert verdicts[TrendWindow.SIX_MONTHS].insufficient_data
        assert verdicts[TrendWindow.ONE_YEAR].decline


class TestVerdictStore:
    def _store(self):
        store = SeriesStore(
            {
                "down": series([0.1 + 0.05 * i for i in range(12)], "down"),
                "up": series([0.9 - 0.05 * i for i in range(12)], "up"),
            }
        )
        return VerdictStore(store, DeclineConfig(), ANCHOR)

    def test_in_decline(self):
        store = self._store()
        assert store.in_decline("down")
        assert not store.in_decline("up")
        assert not store.in_decline("missing")

    def test_rows_round_trip_into_preload(self):
        rows = verdict_rows(self._store(), ["up", "down"])
        assert len(rows) == 2 * len(TrendWindow)
        assert [row.package for row in rows[:3]] == ["down"] * 3
        buffer = io.StringIO()
        write_rows(rows, buffer)
        buffer.seek(0)
        loaded = read_rows(buffer)
        assert loaded == rows

        fresh = VerdictStore(SeriesStore({}), DeclineConfig(), ANCHOR)
        fresh.preload(loaded)
        assert fresh.in_decline("down")
        assert not fresh.in_decline("up")

    def test_csv_header(self):
        buffer = io.StringIO()
        write_rows(verdict_rows(self._store(), ["down"]), buffer, "csv")
        header = buffer.getvalue().splitlines()[0]
        assert header.startswith("package,window,n,s_statistic,p_value")
        assert header.endswith("in_decline")
