"""Standardized fund-performance metrics over NAV series.

Annualization uses 252 trading days and sample (n-1) standard deviation;
ratios that are undefined on a series (too short, zero dispersion) are
reported absent rather than zero, so a one-day fund cannot top a leaderboard
on a degenerate number. Floating point is permitted here (unlike fund
accounting); the acceptance tolerance versus independent recomputation
is 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from decimal import Decimal
from typing import Iterable, Sequence

from .errors import UnknownMetric
from .portfolio import TradeFill

TRADING_DAYS_PER_YEAR = 252

METRIC_FIELDS = (
    "cumulative_return",
    "annualized_return",
    "volatility",
    "sharpe",
    "sortino",
    "max_drawdown",
    "win_rate",
    "turnover",
)


@dataclass(frozen=True)
class MetricsReport:
    cumulative_return: float | None = None
    annualized_return: float | None = None
    volatility: float | None = None
    sharpe: float | None = None
    sortino: float | None = None
    max_drawdown: float | None = None
    win_rate: float | None = None
    turnover: float | None = None
    n_days: int = 0

    def to_dict(self) -> dict:
        return {
            "cumulative_return": self.cumulative_return,
            "annualized_return": self.annualized_return,
            "volatility": self.volatility,
            "sharpe": self.sharpe,
            "sortino": self.sortino,
            "max_drawdown": self.max_drawdown,
            "win_rate": self.win_rate,
            "turnover": self.turnover,
            "n_days": self.n_days,
        }

    def value(self, key: str) -> float | None:
        if key not in METRIC_FIELDS:
            raise UnknownMetric(f"unknown metric {key!r}; valid: {', '.join(METRIC_FIELDS)}")
        return getattr(self, key)


def daily_returns(navs: Sequence[float]) -> list[float]:
    return [navs[i] / navs[i - 1] - 1.0 for i in range(1, len(navs))]


def max_drawdown(navs: Sequence[float]) -> float:
    peak = -math.inf
    worst = 0.0
    for nav in navs:
        peak = max(peak, nav)
        worst = max(worst, (peak - nav) / peak)
    return worst


def compute_metrics(
    series: Sequence[tuple[date, Decimal]],
    fills: Iterable[TradeFill] = (),
    rf_annual: float = 0.0,
) -> MetricsReport:
    """The full report for one fund's NAV series and executed fills."""
    navs = [float(nav) for _, nav in series]
    n_days = len(navs)
    if n_days == 0:
        return MetricsReport(n_days=0)

    returns = daily_returns(navs)
    cumulative = navs[-1] / navs[0] - 1.0
    annualized = (1.0 + cumulative) ** (TRADING_DAYS_PER_YEAR / n_days) - 1.0 if n_days >= 2 else None

    volatility = sharpe = None
    if len(returns) >= 2:
        mean_r = sum(returns) / len(returns)
        var = sum((r - mean_r) ** 2 for r in returns) / (len(returns) - 1)
        stdev = math.sqrt(var)
        volatility = stdev * math.sqrt(TRADING_DAYS_PER_YEAR)
        if stdev > 0.0:
            sharpe = (mean_r - rf_annual / TRADING_DAYS_PER_YEAR) / stdev * math.sqrt(TRADING_DAYS_PER_YEAR)

    sortino = None
    if returns:
        mean_r = sum(returns) / len(returns)
        downside = math.sqrt(sum(min(r, 0.0) ** 2 for r in returns) / len(returns))
        if downside > 0.0:
            sortino = (mean_r - rf_annual / TRADING_DAYS_PER_YEAR) / downside * math.sqrt(TRADING_DAYS_PER_YEAR)

    win_rate = (sum(1 for r in returns if r > 0.0) / len(returns)) if returns else None

    traded = sum(float(fill.notional()) for fill in fills)
    turnover = traded / (sum(navs) / n_days)

    return MetricsReport(
        cumulative_return=cumulative,
        annualized_return=annualized,
        volatility=volatility,
        sharpe=sharpe,
        sortino=sortino,
        max_drawdown=max_drawdown(navs),
        win_rate=win_rate,
        turnover=turnover,
        n_days=n_days,
    )


def leaderboard(reports: dict[str, MetricsReport], rank_key: str = "sharpe") -> list[dict]:
    """Total, deterministic ranking: descending by the key, absent values
    last, ties broken by cumulative return then fund id."""
    if rank_key not in METRIC_FIELDS:
        raise UnknownMetric(f"unknown metric {rank_key!r}; valid: {', '.join(METRIC_FIELDS)}")

    def sort_key(item: tuple[str, MetricsReport]):
        fund_id, report = item
        value = report.value(rank_key)
        cumulative = report.cumulative_return
        return (
            value is None,
            -(value if value is not None else 0.0),
            cumulative is None,
            -(cumulative if cumulative is not None else 0.0),
            fund_id,
        )

    ranked = sorted(reports.items(), key=sort_key)
    return [
        {"rank": i + 1, "fund_id": fund_id, "rank_key": rank_key, "metrics": report.to_dict()}
        for i, (fund_id, report) in enumerate(ranked)
    ]
