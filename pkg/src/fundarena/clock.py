"""Forward-only simulation clock primitives.

``AsOf`` pairs the exact query instant with the trading day it belongs to.
Every gated read and every cycle is stamped with one, and instants never
decrease within a run.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timezone

# Default intra-day sample point for a trading day's cycle: after the close
# of any listed-equity session expressible in UTC.
DEFAULT_SAMPLE_TIME_UTC = time(22, 0, 0)


def parse_instant(value: str | datetime) -> datetime:
    """Parse an ISO-8601 UTC timestamp (``Z`` suffix accepted) to aware UTC."""
    if isinstance(value, datetime):
        dt = value
    else:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_instant(dt: datetime) -> str:
    """Canonical wire form: second precision, ``Z`` suffix."""
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_date(value: str | date) -> date:
    if isinstance(value, date) and not isinstance(value, datetime):
        return value
    return date.fromisoformat(str(value))


@dataclass(frozen=True, order=True)
class AsOf:
    """A point on the arena's forward-only clock.

    ``trading_date`` is the most recent trading day whose close is at or
    before ``instant``; the trading calendar is data-driven, so resolution
    lives in the market-data store (`MarketDataStore.as_of`).
    """

    instant: datetime
    trading_date: date

    def __post_init__(self):
        object.__setattr__(self, "instant", parse_instant(self.instant))
        object.__setattr__(self, "trading_date", parse_date(self.trading_date))

    @classmethod
    def at_sample_time(cls, trading_date: date | str, sample_time: time = DEFAULT_SAMPLE_TIME_UTC) -> "AsOf":
        """The canonical as-of for a cycle on ``trading_date``."""
        td = parse_date(trading_date)
        return cls(datetime.combine(td, sample_time, tzinfo=timezone.utc), td)

    def to_dict(self) -> dict:
        return {"instant": format_instant(self.instant), "trading_date": self.trading_date.isoformat()}

    @classmethod
    def from_dict(cls, payload: dict) -> "AsOf":
        return cls(parse_instant(payload["instant"]), parse_date(payload["trading_date"]))
