"""Shared fixtures: handmade mini dataset, sample data dir, scripted services."""

from __future__ import annotations

import json
from datetime import date, datetime, time, timedelta, timezone

import pytest

from fundarena.clock import AsOf
from fundarena.fixtures import generate_sample_dataset
from fundarena.market_data import (
    FundamentalSnapshot,
    InsiderTransaction,
    MarketDataStore,
    NewsItem,
    PriceBar,
)
from fundarena.numerics import q6
from fundarena.service import ArenaService, init_data_dir


def utc(y, m, d, hh=0, mm=0, ss=0) -> datetime:
    return datetime(y, m, d, hh, mm, ss, tzinfo=timezone.utc)


def bar(ticker, day: date, close, open_=None, volume=1000, available=None) -> PriceBar:
    close = q6(close)
    open_ = q6(open_ if open_ is not None else close)
    high = max(open_, close)
    low = min(open_, close)
    return PriceBar(
        ticker=ticker,
        date=day,
        open=open_,
        high=high,
        low=low,
        close=close,
        volume=volume,
        available_at=available or datetime.combine(day, time(21, 0), tzinfo=timezone.utc),
    )


MINI_DAYS = [date(2025, 6, 2) + timedelta(days=offset) for offset in (0, 1, 2, 3, 4, 7, 8, 9)]


def build_mini_store() -> MarketDataStore:
    """Readable handmade dataset used by the gating tests."""
    store = MarketDataStore("mini")
    records = []
    for i, day in enumerate(MINI_DAYS):
        records.append(bar("AAPL", day, 100 + i))
        records.append(bar("MSFT", day, 300 - 2 * i))
    records += [
        NewsItem("n1", ("AAPL",), utc(2025, 6, 3, 13, 0), "AAPL headline one", "body1", "wire"),
        NewsItem("n2", ("AAPL",), utc(2025, 6, 4, 9, 30), "AAPL headline two", "body2", "wire"),
        NewsItem("n3", ("AAPL", "MSFT"), utc(2025, 6, 9, 23, 0), "joint headline", "body3", "wire"),
        NewsItem("n4", ("MSFT",), utc(2025, 6, 10, 8, 0), "MSFT headline", "body4", "wire"),
    ]
    records += [
        FundamentalSnapshot("AAPL", date(2025, 3, 31), utc(2025, 6, 3, 11, 0), {"revenue": q6(1000), "eps": q6("1.25")}),
        FundamentalSnapshot("AAPL", date(2025, 6, 1), utc(2025, 6, 9, 11, 0), {"revenue": q6(1100), "eps": q6("1.40")}),
        FundamentalSnapshot("MSFT", date(2025, 3, 31), utc(2025, 6, 4, 12, 0), {"revenue": q6(2000)}),
    ]
    records += [
        InsiderTransaction("AAPL", utc(2025, 6, 3, 15, 0), "CEO", "SELL", 1_000, q6("101.50")),
        InsiderTransaction("AAPL", utc(2025, 6, 5, 15, 0), "CFO", "BUY", 500, q6("103.20")),
        InsiderTransaction("AAPL", utc(2025, 6, 10, 15, 0), "DIRECTOR", "BUY", 2_000, q6("106.10")),
        InsiderTransaction("MSFT", utc(2025, 6, 6, 15, 0), "CEO", "BUY", 750, q6("292.00")),
    ]
    store.ingest_records("mini-fixture", records)
    return store


@pytest.fixture
def mini_store() -> MarketDataStore:
    return build_mini_store()


@pytest.fixture
def as_of_jun10() -> AsOf:
    # 2025-06-10 22:00 UTC, after that day's bars became available.
    return AsOf(utc(2025, 6, 10, 22, 0), date(2025, 6, 10))


@pytest.fixture
def data_dir(tmp_path):
    root = tmp_path / "arena"
    init_data_dir(root)
    return root


@pytest.fixture
def service(data_dir) -> ArenaService:
    return ArenaService(data_dir)


def make_fund(service: ArenaService, name="Test Fund", model="mock-balanced", pool=None, cash="100000", config=None, fund_id=None):
    return service.create_fund(
        name=name,
        model_spec=model,
        stock_pool=pool or ["AAPL", "AMZN", "GOOG", "MSFT", "NVDA"],
        initial_cash=cash,
        config=config,
        fund_id=fund_id,
    )


def read_event_lines(data_dir, fund_id) -> list[str]:
    path = data_dir / "funds" / fund_id / "events.jsonl"
    return path.read_text(encoding="utf-8").splitlines()


def read_events(data_dir, fund_id) -> list[dict]:
    return [json.loads(line) for line in read_event_lines(data_dir, fund_id)]
