"""Deterministic synthetic fixture datasets for offline runs and tests.

Seeded generation: the same arguments always produce the same JSONL files,
so replays over the sample dataset are reproducible everywhere.
"""

from __future__ import annotations

import random
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

from .market_data import (
    FundamentalSnapshot,
    InsiderTransaction,
    MarketDataStore,
    NewsItem,
    PriceBar,
)
from .numerics import q6

SAMPLE_TICKERS = ("AAPL", "AMZN", "GOOG", "MSFT", "NVDA")
SAMPLE_START = date(2025, 6, 2)
SAMPLE_DAYS = 10

BAR_AVAILABLE_UTC = time(21, 0)
NEWS_PUBLISH_UTC = time(13, 30)
FILING_UTC = time(11, 0)

_HEADLINES = (
    "{t} beats quarterly revenue expectations",
    "{t} announces product roadmap update",
    "Analysts weigh {t} demand outlook",
    "{t} expands capacity amid supply questions",
    "Regulatory filing sheds light on {t} strategy",
)


def weekdays_from(start: date, count: int) -> list[date]:
    days = []
    cursor = start
    while len(days) < count:
        if cursor.weekday() < 5:
            days.append(cursor)
        cursor += timedelta(days=1)
    return days


def generate_sample_dataset(
    dataset_dir: str | Path,
    tickers: tuple[str, ...] = SAMPLE_TICKERS,
    start: date = SAMPLE_START,
    n_days: int = SAMPLE_DAYS,
    seed: int = 42,
) -> MarketDataStore:
    """Build and save a small, fully self-consistent dataset."""
    rng = random.Random(seed)
    store = MarketDataStore(Path(dataset_dir).name)
    days = weekdays_from(start, n_days)
    records = []

    for ticker in tickers:
        level = rng.uniform(40, 400)
        for day in days:
            drift = rng.uniform(-0.025, 0.028)
            open_px = level
            close_px = max(1.0, level * (1 + drift))
            high_px = max(open_px, close_px) * (1 + rng.uniform(0, 0.01))
            low_px = min(open_px, close_px) * (1 - rng.uniform(0, 0.01))
            records.append(
                PriceBar(
                    ticker=ticker,
                    date=day,
                    open=q6(round(open_px, 2)),
                    high=q6(round(high_px, 2)),
                    low=q6(round(low_px, 2)),
                    close=q6(round(close_px, 2)),
                    volume=rng.randrange(1_000_000, 60_000_000),
                    available_at=datetime.combine(day, BAR_AVAILABLE_UTC, tzinfo=timezone.utc),
                )
            )
            level = close_px

        # A filing that predates the range plus one mid-range update.
        period_end = start - timedelta(days=45)
        records.append(
            FundamentalSnapshot(
                ticker=ticker,
                report_period=period_end,
                filed_at=datetime.combine(start - timedelta(days=14), FILING_UTC, tzinfo=timezone.utc),
                figures={
                    "revenue": q6(rng.randrange(5, 120) * 1_000_000_000),
                    "net_income": q6(rng.randrange(1, 30) * 1_000_000_000),
                    "total_assets": q6(rng.randrange(100, 500) * 1_000_000_000),
                    "total_liabilities": q6(rng.randrange(50, 300) * 1_000_000_000),
                    "eps": q6(round(rng.uniform(0.5, 9.0), 2)),
                    "shares_outstanding": q6(rng.randrange(1, 16) * 1_000_000_000),
                },
            )
        )
        mid = days[len(days) // 2]
        records.append(
            FundamentalSnapshot(
                ticker=ticker,
                report_period=mid - timedelta(days=30),
                filed_at=datetime.combine(mid, FILING_UTC, tzinfo=timezone.utc),
                figures={
                    "revenue": q6(rng.randrange(5, 130) * 1_000_000_000),
                    "net_income": q6(rng.randrange(1, 32) * 1_000_000_000),
                    "eps": q6(round(rng.uniform(0.5, 9.5), 2)),
                },
            )
        )

        for i, day in enumerate(days):
            if rng.random() < 0.6:
                records.append(
                    NewsItem(
                        id=f"news-{ticker}-{day.isoformat()}",
                        tickers=(ticker,),
                        published_at=datetime.combine(day, NEWS_PUBLISH_UTC, tzinfo=timezone.utc),
                        headline=_HEADLINES[i % len(_HEADLINES)].format(t=ticker),
                        body=f"Synthetic wire story about {ticker} for {day.isoformat()}.",
                        source="fixture-wire",
                    )
                )
            if rng.random() < 0.25:
                records.append(
                    InsiderTransaction(
                        ticker=ticker,
                        filed_at=datetime.combine(day, FILING_UTC, tzinfo=timezone.utc),
                        insider_role=rng.choice(("CEO", "CFO", "DIRECTOR", "COO")),
                        direction=rng.choice(("BUY", "SELL")),
                        shares=rng.randrange(500, 20_000),
                        price=q6(round(level * rng.uniform(0.97, 1.03), 2)),
                    )
                )

    store.ingest_records("fixture-generator", records)
    store.save(dataset_dir)
    return store
