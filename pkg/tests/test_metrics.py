"""Metrics against independent recomputation; leaderboard determinism."""

from __future__ import annotations

import math
import random
import statistics
from datetime import date, timedelta
from decimal import Decimal

import pytest

from fundarena.clock import AsOf
from fundarena.errors import UnknownMetric
from fundarena.metrics import MetricsReport, compute_metrics, leaderboard
from fundarena.numerics import q6
from fundarena.portfolio import TradeFill

TOL = 1e-9


def series_of(navs, start=date(2025, 6, 2)):
    return [(start + timedelta(days=i), q6(v)) for i, v in enumerate(navs)]


# --- independent oracles ---

def oracle_drawdown(navs):
    """O(n^2): max over all (peak, trough) pairs with peak before trough."""
    worst = 0.0
    for i in range(len(navs)):
        for j in range(i, len(navs)):
            worst = max(worst, (navs[i] - navs[j]) / navs[i])
    return worst


def oracle_sharpe_vol(navs, rf_annual=0.0):
    rets = [navs[i] / navs[i - 1] - 1 for i in range(1, len(navs))]
    if len(rets) < 2:
        return None, None
    sd = statistics.stdev(rets)
    vol = sd * math.sqrt(252)
    if sd == 0:
        return None, vol
    sharpe = (statistics.mean(rets) - rf_annual / 252) / sd * math.sqrt(252)
    return sharpe, vol


class TestComputeMetrics:
    def test_constant_series(self):
        report = compute_metrics(series_of([100] * 8))
        assert report.cumulative_return == 0.0
        assert report.max_drawdown == 0.0
        assert report.sharpe is None  # zero stdev: absent, not zero
        assert report.volatility == 0.0
        assert report.win_rate == 0.0
        assert report.n_days == 8

    def test_two_step_peak_arithmetic(self):
        report = compute_metrics(series_of([100, 110, 99]))
        assert abs(report.max_drawdown - (110 - 99) / 110) < TOL

    def test_fifty_random_series_match_oracles(self):
        rng = random.Random(17)
        for _ in range(50):
            navs = [100.0]
            for _ in range(rng.randrange(2, 49)):
                navs.append(max(1.0, navs[-1] * (1 + rng.uniform(-0.05, 0.05))))
            floats = [float(q6(v)) for v in navs]
            report = compute_metrics(series_of(navs))
            assert report.max_drawdown == oracle_drawdown(floats)
            sharpe, vol = oracle_sharpe_vol(floats)
            if sharpe is None:
                assert report.sharpe is None
            else:
                assert abs(report.sharpe - sharpe) < TOL
            assert abs(report.volatility - vol) < TOL

    def test_formula_fields(self):
        navs = [100.0, 104.0, 101.0, 108.0]
        report = compute_metrics(series_of(navs))
        floats = [float(q6(v)) for v in navs]
        cum = floats[-1] / floats[0] - 1
        assert abs(report.cumulative_return - cum) < TOL
        assert abs(report.annualized_return - ((1 + cum) ** (252 / 4) - 1)) < TOL
        rets = [floats[i] / floats[i - 1] - 1 for i in range(1, 4)]
        assert abs(report.win_rate - 2 / 3) < TOL
        downside = math.sqrt(sum(min(r, 0) ** 2 for r in rets) / 3)
        assert abs(report.sortino - statistics.mean(rets) / downside * math.sqrt(252)) < TOL

    def test_turnover_sums_fill_notional_over_mean_nav(self):
        as_of = AsOf.at_sample_time(date(2025, 6, 2))
        fills = [
            TradeFill("AAPL", "BUY", 10, q6(100), q6(0), as_of),
            TradeFill("AAPL", "SELL", 4, q6(110), q6(0), as_of),
        ]
        report = compute_metrics(series_of([1000, 1010]), fills)
        assert abs(report.turnover - (1000 + 440) / 1005) < TOL

    def test_degenerate_series_reports_absent_not_zero(self):
        report = compute_metrics(series_of([100]))
        assert report.n_days == 1
        assert report.cumulative_return == 0.0
        assert report.annualized_return is None
        assert report.volatility is None and report.sharpe is None
        assert report.win_rate is None
        report = compute_metrics([])
        assert report.n_days == 0 and report.cumulative_return is None

    def test_all_up_days_have_absent_sortino(self):
        report = compute_metrics(series_of([100, 101, 102, 103]))
        assert report.sortino is None  # zero downside deviation
        assert report.max_drawdown == 0.0

    def test_scale_invariance(self):
        rng = random.Random(31)
        navs = [100.0]
        for _ in range(30):
            navs.append(max(1.0, navs[-1] * (1 + rng.uniform(-0.04, 0.04))))
        as_of = AsOf.at_sample_time(date(2025, 6, 2))
        fills = [TradeFill("AAPL", "BUY", 3, q6(50), q6(0), as_of)]
        fills_scaled = [TradeFill("AAPL", "BUY", 3, q6(50 * 7), q6(0), as_of)]
        a = compute_metrics(series_of(navs), fills)
        b = compute_metrics(series_of([v * 7 for v in navs]), fills_scaled)
        for field in ("cumulative_return", "annualized_return", "volatility", "sharpe", "sortino", "max_drawdown", "win_rate", "turnover"):
            va, vb = getattr(a, field), getattr(b, field)
            if va is None:
                assert vb is None
            else:
                assert abs(va - vb) < 1e-6, field

    def test_drawdown_bounds(self):
        rng = random.Random(8)
        for _ in range(30):
            navs = [max(0.5, 100 + rng.uniform(-90, 200)) for _ in range(rng.randrange(1, 30))]
            report = compute_metrics(series_of(navs))
            assert 0.0 <= report.max_drawdown < 1.0
        nondecreasing = sorted(max(1.0, 50 + rng.uniform(0, 10) * i) for i in range(10))
        assert compute_metrics(series_of(nondecreasing)).max_drawdown == 0.0


class TestLeaderboard:
    def report(self, sharpe=None, cumulative=None):
        return MetricsReport(sharpe=sharpe, cumulative_return=cumulative, n_days=10)

    def test_descending_order(self):
        rows = leaderboard({"a": self.report(sharpe=0.5), "b": self.report(sharpe=1.0)})
        assert [r["fund_id"] for r in rows] == ["b", "a"]
        assert [r["rank"] for r in rows] == [1, 2]

    def test_absent_key_ranks_last(self):
        rows = leaderboard({"a": self.report(sharpe=None, cumulative=9.0), "b": self.report(sharpe=-2.0)})
        assert [r["fund_id"] for r in rows] == ["b", "a"]

    def test_tie_broken_by_cumulative_then_fund_id(self):
        rows = leaderboard(
            {
                "zeta": self.report(sharpe=1.0, cumulative=0.1),
                "alpha": self.report(sharpe=1.0, cumulative=0.1),
                "mid": self.report(sharpe=1.0, cumulative=0.4),
            }
        )
        assert [r["fund_id"] for r in rows] == ["mid", "alpha", "zeta"]

    def test_unknown_metric(self):
        with pytest.raises(UnknownMetric):
            leaderboard({"a": self.report()}, rank_key="alpha_decay")

    def test_total_deterministic_order(self):
        rng = random.Random(12)
        reports = {
            f"fund-{i}": MetricsReport(
                sharpe=rng.choice([None, rng.uniform(-2, 2)]),
                cumulative_return=rng.choice([None, rng.uniform(-0.5, 0.5)]),
                n_days=rng.randrange(0, 50),
            )
            for i in range(25)
        }
        first = [r["fund_id"] for r in leaderboard(reports)]
        second = [r["fund_id"] for r in leaderboard(dict(reversed(list(reports.items()))))]
        assert first == second and len(first) == 25
