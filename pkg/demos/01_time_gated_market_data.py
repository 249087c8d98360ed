"""Demo: point-in-time market data access.

Builds a tiny dataset, then shows that queries keyed by an as-of instant can
never see facts that were not yet available, and that the leakage auditor
catches anything that slips through.

Run: python demos/01_time_gated_market_data.py
"""

from datetime import date, datetime, time, timedelta, timezone
from decimal import Decimal

from fundarena import AsOf, MarketDataStore, NewsItem, PriceBar, audit_leakage


def utc(day, hh, mm=0):
    return datetime.combine(day, time(hh, mm), tzinfo=timezone.utc)


def main():
    store = MarketDataStore("demo")
    monday = date(2025, 6, 2)
    records = []
    for offset in range(5):  # Mon..Fri
        day = monday + timedelta(days=offset)
        px = Decimal(100 + offset)
        records.append(
            PriceBar(
                ticker="AAPL", date=day,
                open=px, high=px + 1, low=px - 1, close=px,
                volume=1_000_000,
                available_at=utc(day, 21),  # bars appear after the close
            )
        )
    records.append(NewsItem("early", ("AAPL",), utc(monday, 13), "Morning story", "…", "wire"))
    records.append(NewsItem("late", ("AAPL",), utc(monday + timedelta(days=3), 13), "Thursday story", "…", "wire"))
    store.ingest_records("demo", records)

    print("dataset: 5 AAPL bars (Mon..Fri) + 2 news items\n")

    # Stand at Wednesday 22:00 UTC.
    wednesday = monday + timedelta(days=2)
    as_of = AsOf(utc(wednesday, 22), wednesday)
    bars = store.get_price_bars("AAPL", lookback_days=10, as_of=as_of)
    print(f"as of {as_of.instant:%a %H:%M}: {len(bars)} bars visible, last close {bars[-1].close}")

    news = store.get_news("AAPL", window_days=7, as_of=as_of)
    print(f"news visible: {[n.id for n in news]}  (Thursday's story is hidden)")

    # Before Wednesday's close only Tuesday's bar is out.
    midday = AsOf(utc(wednesday, 12), wednesday - timedelta(days=1))
    bars = store.get_price_bars("AAPL", 10, midday)
    print(f"at Wednesday noon the last visible bar is {bars[-1].date} (yesterday)")

    # The auditor names any future fact in a result set.
    thursday_bar = store.get_price_bars("AAPL", 10, AsOf(utc(monday + timedelta(days=4), 22), monday + timedelta(days=4)))[-1]
    violations = audit_leakage(as_of, bars + [thursday_bar])
    print("\ninjecting a future bar into Wednesday's results:")
    for violation in violations:
        print("  VIOLATION:", violation.describe())


if __name__ == "__main__":
    main()
