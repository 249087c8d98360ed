"""Demo: a full arena replay with a scripted model, end to end and offline.

Scaffolds a data directory, creates a fund, replays ten trading days through
the planner -> analysts -> manager pipeline, prints one cycle's reasoning,
and proves the run is reproducible byte-for-byte.

Run: python demos/03_replay_arena.py
"""

import tempfile
from datetime import date
from pathlib import Path

from fundarena import ArenaService
from fundarena.service import init_data_dir


def build_and_run(root: Path):
    init_data_dir(root)
    service = ArenaService(root)
    service.create_fund(
        name="Demo Arena Fund",
        model_spec="mock-balanced",
        stock_pool=["AAPL", "AMZN", "GOOG", "MSFT", "NVDA"],
        initial_cash="100000",
        inception="2025-06-02",
        fund_id="demo",
    )
    run, records = service.replay("demo", date(2025, 6, 2), date(2025, 6, 13), run_id="demo-run")
    return service, run, records


def main():
    with tempfile.TemporaryDirectory() as tmp_a, tempfile.TemporaryDirectory() as tmp_b:
        service, run, records = build_and_run(Path(tmp_a))
        print(f"run {run.run_id}: {run.status}, {run.cycles_done} cycles\n")

        print(f"{'date':<12}{'nav':>14}{'fills':>7}  actions")
        for record in records:
            actions = ",".join(f"{t}:{d.action[0]}" for t, d in sorted(record.decisions.items()))
            print(f"{record.trading_date.isoformat():<12}{record.nav_snapshot.to_dict()['nav']:>14}{len(record.fills):>7}  {actions}")

        first = records[0]
        ticker_report = first.report.tickers[0]
        print(f"\ninside cycle {first.trading_date}, ticker {ticker_report.ticker}:")
        for signal in ticker_report.signals:
            print(f"  {signal.kind:<12} {signal.stance:<8} conf {signal.confidence:.2f}")
        decision = ticker_report.decision
        print(f"  manager -> {decision.action} qty {decision.quantity} ({decision.rationale})")

        metrics = service.metrics("demo")
        print(f"\nmetrics: cum {metrics.cumulative_return:+.4f}  max_dd {metrics.max_drawdown:.4f}  n_days {metrics.n_days}")

        # Reproducibility: an identical second run yields identical event bytes.
        _, _, records_b = build_and_run(Path(tmp_b))
        events_a = (Path(tmp_a) / "funds" / "demo" / "events.jsonl").read_bytes()
        events_b = (Path(tmp_b) / "funds" / "demo" / "events.jsonl").read_bytes()
        print(f"\nsecond run byte-identical: {events_a == events_b}")


if __name__ == "__main__":
    main()
