"""Time-gated access layer over upstream financial facts.

Every fact carries an availability timestamp, and every query is keyed by an
``AsOf``: a read at time T can only ever return facts that existed at T. The
boundary is inclusive (a fact available exactly at T is visible).

Two provider modes exist: ``replay`` reads JSONL fixture files fully offline
(the default), and ``live`` pulls from HTTP feeds and snapshots everything it
receives back into the replay store, so any live run is re-runnable.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .clock import AsOf, format_instant, parse_date, parse_instant
from .errors import ProviderUnavailable, UnknownTicker, ValidationFailed
from .numerics import money_str, q6

_TICKER_RE = re.compile(r"^[A-Z][A-Z.]{0,9}$")

# Assigned when an upstream bar lacks an explicit availability timestamp:
# the latest listed-equity close expressible for that calendar date in UTC.
BAR_DEFAULT_AVAILABLE_UTC = time(21, 0, 0)

FUNDAMENTAL_FIGURE_KEYS = frozenset({
    "revenue",
    "net_income",
    "total_assets",
    "total_liabilities",
    "eps",
    "shares_outstanding",
})

FIXTURE_FILES = {
    "bars": "bars.jsonl",
    "news": "news.jsonl",
    "fundamentals": "fundamentals.jsonl",
    "insiders": "insiders.jsonl",
}


def validate_ticker(symbol: str) -> str:
    if not isinstance(symbol, str) or not _TICKER_RE.match(symbol):
        raise ValidationFailed(f"invalid ticker symbol: {symbol!r}")
    return symbol


@dataclass(frozen=True)
class PriceBar:
    ticker: str
    date: date
    open: Decimal
    high: Decimal
    low: Decimal
    close: Decimal
    volume: int
    available_at: datetime

    def validate(self) -> None:
        validate_ticker(self.ticker)
        if self.volume < 0:
            raise ValidationFailed(f"{self.ticker} {self.date}: volume < 0")
        if not (self.low <= self.open <= self.high and self.low <= self.close <= self.high):
            raise ValidationFailed(f"{self.ticker} {self.date}: OHLC out of order (low <= open,close <= high)")
        if self.available_at.date() < self.date:
            raise ValidationFailed(f"{self.ticker} {self.date}: available_at precedes the bar's own date")

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "date": self.date.isoformat(),
            "open": money_str(self.open),
            "high": money_str(self.high),
            "low": money_str(self.low),
            "close": money_str(self.close),
            "volume": self.volume,
            "available_at": format_instant(self.available_at),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PriceBar":
        day = parse_date(raw["date"])
        available = raw.get("available_at")
        if available is None:
            available_at = datetime.combine(day, BAR_DEFAULT_AVAILABLE_UTC, tzinfo=timezone.utc)
        else:
            available_at = parse_instant(available)
        return cls(
            ticker=raw["ticker"],
            date=day,
            open=q6(raw["open"]),
            high=q6(raw["high"]),
            low=q6(raw["low"]),
            close=q6(raw["close"]),
            volume=int(raw["volume"]),
            available_at=available_at,
        )


@dataclass(frozen=True)
class NewsItem:
    id: str
    tickers: tuple[str, ...]
    published_at: datetime
    headline: str
    body: str
    source: str

    def validate(self) -> None:
        if not self.id:
            raise ValidationFailed("news item without id")
        if self.published_at is None:
            raise ValidationFailed(f"news {self.id}: published_at missing")
        for symbol in self.tickers:
            validate_ticker(symbol)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tickers": list(self.tickers),
            "published_at": format_instant(self.published_at),
            "headline": self.headline,
            "body": self.body,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "NewsItem":
        return cls(
            id=str(raw["id"]),
            tickers=tuple(raw.get("tickers", ())),
            published_at=parse_instant(raw["published_at"]),
            headline=raw.get("headline", ""),
            body=raw.get("body", ""),
            source=raw.get("source", ""),
        )


@dataclass(frozen=True)
class FundamentalSnapshot:
    ticker: str
    report_period: date
    filed_at: datetime
    figures: dict[str, Decimal] = field(default_factory=dict)

    def validate(self) -> None:
        validate_ticker(self.ticker)
        if self.filed_at.date() < self.report_period:
            raise ValidationFailed(f"{self.ticker}: filed_at precedes report_period")
        unknown = set(self.figures) - FUNDAMENTAL_FIGURE_KEYS
        if unknown:
            raise ValidationFailed(f"{self.ticker}: unknown figure keys {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "report_period": self.report_period.isoformat(),
            "filed_at": format_instant(self.filed_at),
            "figures": {k: money_str(v) for k, v in sorted(self.figures.items())},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FundamentalSnapshot":
        return cls(
            ticker=raw["ticker"],
            report_period=parse_date(raw["report_period"]),
            filed_at=parse_instant(raw["filed_at"]),
            figures={k: q6(v) for k, v in raw.get("figures", {}).items()},
        )


@dataclass(frozen=True)
class InsiderTransaction:
    ticker: str
    filed_at: datetime
    insider_role: str
    direction: str
    shares: int
    price: Decimal

    def validate(self) -> None:
        validate_ticker(self.ticker)
        if self.direction not in ("BUY", "SELL"):
            raise ValidationFailed(f"{self.ticker}: insider direction must be BUY or SELL")
        if self.shares <= 0:
            raise ValidationFailed(f"{self.ticker}: insider shares must be > 0")

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "filed_at": format_instant(self.filed_at),
            "insider_role": self.insider_role,
            "direction": self.direction,
            "shares": self.shares,
            "price": money_str(self.price),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "InsiderTransaction":
        return cls(
            ticker=raw["ticker"],
            filed_at=parse_instant(raw["filed_at"]),
            insider_role=raw.get("insider_role", ""),
            direction=raw["direction"],
            shares=int(raw["shares"]),
            price=q6(raw["price"]),
        )


MarketFact = PriceBar | NewsItem | FundamentalSnapshot | InsiderTransaction


def availability_of(fact: MarketFact) -> datetime:
    """The timestamp that gates a fact's visibility."""
    if isinstance(fact, PriceBar):
        return fact.available_at
    if isinstance(fact, NewsItem):
        return fact.published_at
    return fact.filed_at


def _fact_label(fact: MarketFact) -> str:
    if isinstance(fact, PriceBar):
        return f"PriceBar({fact.ticker}, {fact.date.isoformat()})"
    if isinstance(fact, NewsItem):
        return f"NewsItem({fact.id})"
    if isinstance(fact, FundamentalSnapshot):
        return f"FundamentalSnapshot({fact.ticker}, {fact.report_period.isoformat()})"
    return f"InsiderTransaction({fact.ticker}, {format_instant(fact.filed_at)})"


@dataclass(frozen=True)
class LeakageViolation:
    fact: str
    available_at: datetime
    as_of_instant: datetime

    def describe(self) -> str:
        return (
            f"{self.fact} available {format_instant(self.available_at)}"
            f" > as_of {format_instant(self.as_of_instant)}"
        )


def audit_leakage(as_of: AsOf, returned_facts: Iterable[MarketFact]) -> list[LeakageViolation]:
    """Independent check that every fact was visible at ``as_of``.

    Returns one violation per future fact; empty list means the gate held.
    """
    violations = []
    for fact in returned_facts:
        ts = availability_of(fact)
        if ts > as_of.instant:
            violations.append(LeakageViolation(_fact_label(fact), ts, as_of.instant))
    return violations


class MarketDataStore:
    """In-memory, point-in-time queryable fact store for one dataset.

    Reads are thread-safe and return immutable snapshots; ingestion is
    serialized (single writer per dataset).
    """

    def __init__(self, name: str = "default"):
        self.name = name
        self._lock = threading.RLock()
        self._bars: dict[str, dict[date, PriceBar]] = {}
        self._news: dict[str, NewsItem] = {}
        self._news_by_ticker: dict[str, set[str]] = {}
        self._fundamentals: dict[str, dict[date, FundamentalSnapshot]] = {}
        self._insiders: dict[str, dict[tuple, InsiderTransaction]] = {}

    # -- ingestion --

    def ingest_records(self, source_name: str, records: Sequence[MarketFact]) -> int:
        """Validate and store a batch; duplicate natural keys replace in place.

        The batch is all-or-nothing: the first invalid record raises
        ``ValidationFailed`` naming its index and nothing is stored.
        """
        for i, record in enumerate(records):
            try:
                record.validate()
            except ValidationFailed as exc:
                raise ValidationFailed(f"record {i} from {source_name}: {exc.message}", index=i) from exc
        with self._lock:
            for record in records:
                self._put(record)
        return len(records)

    def _put(self, record: MarketFact) -> None:
        if isinstance(record, PriceBar):
            self._bars.setdefault(record.ticker, {})[record.date] = record
        elif isinstance(record, NewsItem):
            self._news[record.id] = record
            for symbol in record.tickers:
                self._news_by_ticker.setdefault(symbol, set()).add(record.id)
        elif isinstance(record, FundamentalSnapshot):
            self._fundamentals.setdefault(record.ticker, {})[record.report_period] = record
        elif isinstance(record, InsiderTransaction):
            key = (record.filed_at, record.insider_role, record.direction, record.shares, record.price)
            self._insiders.setdefault(record.ticker, {})[key] = record
        else:
            raise ValidationFailed(f"unsupported record type {type(record).__name__}")

    # -- calendar --

    def known_tickers(self) -> set[str]:
        with self._lock:
            return (
                set(self._bars)
                | set(self._news_by_ticker)
                | set(self._fundamentals)
                | set(self._insiders)
            )

    def _require_ticker(self, ticker: str) -> None:
        if ticker not in self.known_tickers():
            raise UnknownTicker(f"ticker {ticker} not in dataset {self.name}")

    def trading_days(self, tickers: Iterable[str] | None = None) -> list[date]:
        """Dates that have price bars; the data-driven trading calendar."""
        with self._lock:
            days: set[date] = set()
            universe = tickers if tickers is not None else list(self._bars)
            for symbol in universe:
                days.update(self._bars.get(symbol, {}))
            return sorted(days)

    def as_of(self, instant: datetime | str) -> AsOf:
        """Resolve an instant to its AsOf using bar availability.

        The trading date is the most recent day whose bars had become
        available by the instant.
        """
        ts = parse_instant(instant)
        candidates = [
            day
            for day in self.trading_days()
            if any(
                bars.get(day) is not None and bars[day].available_at <= ts
                for bars in self._bars.values()
            )
        ]
        if not candidates:
            raise ValidationFailed(f"no trading day closed at or before {format_instant(ts)}")
        return AsOf(ts, max(candidates))

    def dataset_start(self) -> date | None:
        days = self.trading_days()
        return days[0] if days else None

    # -- gated queries --

    def get_price_bars(self, ticker: str, lookback_days: int, as_of: AsOf) -> list[PriceBar]:
        """Up to ``lookback_days`` bars ending at the as-of trading date."""
        self._require_ticker(ticker)
        with self._lock:
            rows = [
                bar
                for day, bar in sorted(self._bars.get(ticker, {}).items())
                if bar.available_at <= as_of.instant and day <= as_of.trading_date
            ]
        return rows[-lookback_days:] if lookback_days >= 0 else rows

    def get_news(self, ticker: str, window_days: int, as_of: AsOf) -> list[NewsItem]:
        """Items published within the window ending at the instant, newest first."""
        self._require_ticker(ticker)
        cutoff = as_of.instant - timedelta(days=window_days)
        with self._lock:
            items = [
                self._news[news_id]
                for news_id in self._news_by_ticker.get(ticker, ())
                if cutoff <= self._news[news_id].published_at <= as_of.instant
            ]
        return sorted(items, key=lambda n: (n.published_at, n.id), reverse=True)

    def get_fundamentals(self, ticker: str, as_of: AsOf) -> FundamentalSnapshot | None:
        """The snapshot with the greatest filed_at at or before the instant."""
        self._require_ticker(ticker)
        with self._lock:
            filed = [
                snap
                for snap in self._fundamentals.get(ticker, {}).values()
                if snap.filed_at <= as_of.instant
            ]
        if not filed:
            return None
        return max(filed, key=lambda s: (s.filed_at, s.report_period))

    def get_insider_transactions(self, ticker: str, window_days: int, as_of: AsOf) -> list[InsiderTransaction]:
        """Filings within the window ending at the instant, newest first."""
        self._require_ticker(ticker)
        cutoff = as_of.instant - timedelta(days=window_days)
        with self._lock:
            rows = [
                txn
                for txn in self._insiders.get(ticker, {}).values()
                if cutoff <= txn.filed_at <= as_of.instant
            ]
        return sorted(
            rows,
            key=lambda t: (t.filed_at, t.insider_role, t.direction, t.shares, t.price),
            reverse=True,
        )

    def close_prices(self, tickers: Iterable[str], as_of: AsOf) -> dict[str, Decimal]:
        """Latest visible close per ticker on the as-of trading date, if any."""
        closes: dict[str, Decimal] = {}
        for symbol in tickers:
            bars = self.get_price_bars(symbol, 1, as_of)
            if bars and bars[-1].date == as_of.trading_date:
                closes[symbol] = bars[-1].close
        return closes

    # -- fixture IO --

    def all_facts(self) -> list[MarketFact]:
        with self._lock:
            facts: list[MarketFact] = []
            for by_day in self._bars.values():
                facts.extend(by_day.values())
            facts.extend(self._news.values())
            for by_period in self._fundamentals.values():
                facts.extend(by_period.values())
            for by_key in self._insiders.values():
                facts.extend(by_key.values())
            return facts

    def save(self, dataset_dir: str | Path) -> Path:
        """Write the replay fixture: one JSONL file per fact type."""
        root = Path(dataset_dir)
        root.mkdir(parents=True, exist_ok=True)
        with self._lock:
            groups = {
                "bars": sorted(
                    (b for by_day in self._bars.values() for b in by_day.values()),
                    key=lambda b: (b.ticker, b.date),
                ),
                "news": sorted(self._news.values(), key=lambda n: (n.published_at, n.id)),
                "fundamentals": sorted(
                    (s for by_p in self._fundamentals.values() for s in by_p.values()),
                    key=lambda s: (s.ticker, s.report_period),
                ),
                "insiders": sorted(
                    (t for by_k in self._insiders.values() for t in by_k.values()),
                    key=lambda t: (t.ticker, t.filed_at, t.insider_role),
                ),
            }
        for kind, rows in groups.items():
            path = root / FIXTURE_FILES[kind]
            with path.open("w", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(json.dumps(row.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
        return root

    @classmethod
    def load(cls, dataset_dir: str | Path, name: str | None = None) -> "MarketDataStore":
        root = Path(dataset_dir)
        store = cls(name or root.name)
        parsers = {
            "bars": PriceBar.from_dict,
            "news": NewsItem.from_dict,
            "fundamentals": FundamentalSnapshot.from_dict,
            "insiders": InsiderTransaction.from_dict,
        }
        for kind, filename in FIXTURE_FILES.items():
            path = root / filename
            if not path.exists():
                continue
            records = []
            for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    records.append(parsers[kind](json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise ValidationFailed(f"{path.name}:{line_no}: {exc}") from exc
            store.ingest_records(str(path), records)
        return store


class LiveMarketDataProvider:
    """Generic HTTP client for the four upstream feeds.

    The platform prescribes no vendor; any feed that can answer these four
    endpoint shapes plugs in. Every batch received is snapshotted into the
    local store so live runs leave a complete replay fixture behind.
    """

    def __init__(self, base_url: str, store: MarketDataStore, transport=None, snapshot_dir: str | Path | None = None):
        self.base_url = base_url.rstrip("/")
        self.store = store
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else None
        if transport is None:
            import requests

            def transport(url, params):
                resp = requests.get(url, params=params, timeout=30)
                resp.raise_for_status()
                return resp.json()

        self._transport = transport

    def _fetch(self, path: str, params: dict) -> list[dict]:
        try:
            payload = self._transport(f"{self.base_url}/{path}", params)
        except Exception as exc:
            raise ProviderUnavailable(f"{path}: {exc}") from exc
        if not isinstance(payload, list):
            raise ProviderUnavailable(f"{path}: expected a JSON array")
        return payload

    def refresh(self, tickers: Iterable[str], as_of: AsOf) -> int:
        """Pull all four feeds for the tickers and snapshot into the store."""
        records: list[MarketFact] = []
        for symbol in tickers:
            params = {"ticker": symbol, "as_of": format_instant(as_of.instant)}
            records.extend(PriceBar.from_dict(r) for r in self._fetch("bars", params))
            records.extend(NewsItem.from_dict(r) for r in self._fetch("news", params))
            records.extend(FundamentalSnapshot.from_dict(r) for r in self._fetch("fundamentals", params))
            records.extend(InsiderTransaction.from_dict(r) for r in self._fetch("insiders", params))
        count = self.store.ingest_records(self.base_url, records)
        if self.snapshot_dir is not None:
            self.store.save(self.snapshot_dir)
        return count
