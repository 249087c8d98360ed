"""Demo: exact-decimal fund accounting and the standard metrics.

Walks one fund through buys, a clamped oversized order, and a sale, checking
the accounting identity at every step, then scores the NAV path.

Run: python demos/02_portfolio_and_metrics.py
"""

from datetime import date, timedelta
from decimal import Decimal

from fundarena import AsOf, Fund, FundConfig, compute_metrics, execute_decision, leaderboard, mark_to_market
from fundarena.numerics import q6
from fundarena.protocol import ManagerDecision


def main():
    as_of = AsOf.at_sample_time(date(2025, 6, 2))
    fund = Fund(
        fund_id="demo-fund",
        name="Demo Fund",
        model_spec_id="mock-hold",
        stock_pool=frozenset({"AAPL", "MSFT"}),
        cash=q6("10000"),
        positions={},
        inception=as_of,
        config=FundConfig(max_position_weight=Decimal("0.2"), fee_bps=10),
    )
    closes = {"AAPL": q6("100"), "MSFT": q6("250")}

    print("start: cash", fund.cash)

    result = execute_decision(fund, ManagerDecision("AAPL", "BUY", 10, 0.9, "demo"), closes["AAPL"], as_of, marks=closes)
    fund = result.fund
    print(f"BUY 10 AAPL @ 100, fee {result.fill.fee}: cash {fund.cash}")

    # An oversized order is clamped to the 20% position-weight cap, not rejected.
    result = execute_decision(fund, ManagerDecision("AAPL", "BUY", 500, 0.9, "demo"), closes["AAPL"], as_of, marks=closes)
    fund = result.fund
    print(f"BUY 500 AAPL requested -> filled {result.fill.quantity} (weight cap)")

    result = execute_decision(fund, ManagerDecision("AAPL", "SELL", 5, 0.5, "demo"), q6("110"), as_of, marks=closes)
    fund = result.fund
    print(f"SELL 5 AAPL @ 110: cash {fund.cash}")

    snap = mark_to_market(fund, closes, as_of)
    independent = fund.cash + sum(closes[t] * p.quantity for t, p in fund.positions.items())
    print(f"mark-to-market: nav {snap.nav} == cash + holdings ({independent}) -> {snap.nav == independent}")

    # Score two NAV paths.
    start = date(2025, 6, 2)
    steady_values = [10000, 10015, 10040, 10035, 10070, 10095, 10090, 10120, 10150, 10170]
    steady = [(start + timedelta(days=i), q6(v)) for i, v in enumerate(steady_values)]
    choppy_values = [10000, 10400, 9900, 10800, 10100, 11000, 10300, 11200, 10600, 11500]
    choppy = [(start + timedelta(days=i), q6(v)) for i, v in enumerate(choppy_values)]
    reports = {"steady-fund": compute_metrics(steady), "choppy-fund": compute_metrics(choppy)}
    for fund_id, report in reports.items():
        print(f"\n{fund_id}: cum {report.cumulative_return:+.4f}  sharpe {report.sharpe and round(report.sharpe, 2)}  max_dd {report.max_drawdown:.4f}")

    print("\nleaderboard by sharpe:")
    for row in leaderboard(reports, "sharpe"):
        print(f"  #{row['rank']} {row['fund_id']}")


if __name__ == "__main__":
    main()
