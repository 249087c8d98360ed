"""Append-only, replayable record of everything a fund ever did.

One JSONL file per fund, canonical serialization (UTF-8, sorted keys, no
insignificant whitespace) — "byte-identical" everywhere in this codebase
means equality of these bytes. Folding a log from seq 1 reproduces the
fund's exact state; the fold and the live execution path share the same
fill-application code so they cannot drift.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from decimal import Decimal
from pathlib import Path

from .clock import AsOf, format_instant, parse_date, parse_instant
from .errors import CorruptLog, SeqConflict, StorageFailure, UnknownFund
from .portfolio import Fund, MemoryEntry, NavSnapshot, TradeFill, apply_fill, append_memory

EVENT_TYPES = (
    "FundCreated",
    "CycleStarted",
    "PlanMade",
    "SignalEmitted",
    "DecisionMade",
    "OrderFilled",
    "OrderSkipped",
    "NavMarked",
    "MemoryAppended",
    "CycleCompleted",
    "CycleFailed",
    "RunControl",
)


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class ArenaEvent:
    seq: int
    ts: datetime
    type: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "ts": format_instant(self.ts), "type": self.type, "payload": self.payload}

    def to_line(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, raw: dict) -> "ArenaEvent":
        return cls(seq=int(raw["seq"]), ts=parse_instant(raw["ts"]), type=raw["type"], payload=raw["payload"])


@dataclass
class FoldedFund:
    """State reconstructed from a log: the fund plus its derived series."""

    fund: Fund
    nav_series: list[tuple[date, Decimal]] = field(default_factory=list)
    contaminated: bool = False
    completed_dates: list[date] = field(default_factory=list)


class EventStore:
    """JSONL-per-fund event log under ``<data_dir>/funds``."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self._locks: dict[str, threading.Lock] = {}
        self._last_seq: dict[str, int] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, fund_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(fund_id, threading.Lock())

    def path_for(self, fund_id: str) -> Path:
        return self.data_dir / "funds" / fund_id / "events.jsonl"

    def fund_exists(self, fund_id: str) -> bool:
        return self.path_for(fund_id).exists()

    def list_funds(self) -> list[str]:
        root = self.data_dir / "funds"
        if not root.exists():
            return []
        return sorted(p.parent.name for p in root.glob("*/events.jsonl"))

    def last_seq(self, fund_id: str) -> int:
        with self._lock_for(fund_id):
            return self._last_seq_unlocked(fund_id)

    def _last_seq_unlocked(self, fund_id: str) -> int:
        if fund_id in self._last_seq:
            return self._last_seq[fund_id]
        path = self.path_for(fund_id)
        last = 0
        if path.exists():
            for event in self._read_raw(fund_id):
                last = event.seq
        self._last_seq[fund_id] = last
        return last

    def _persist(self, path: Path, blob: bytes) -> None:
        """Single write point; tests monkeypatch this to inject failures."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("ab") as fh:
            fh.write(blob)
            fh.flush()
            os.fsync(fh.fileno())

    def append(self, fund_id: str, events: list[ArenaEvent]) -> int:
        """Append a contiguous batch; durable before return, all-or-nothing."""
        with self._lock_for(fund_id):
            last = self._last_seq_unlocked(fund_id)
            if not events:
                return last
            expected = last + 1
            for event in events:
                if event.seq != expected:
                    raise SeqConflict(f"{fund_id}: expected seq {expected}, got {event.seq}")
                expected += 1
            blob = ("".join(event.to_line() + "\n" for event in events)).encode("utf-8")
            try:
                self._persist(self.path_for(fund_id), blob)
            except OSError as exc:
                raise StorageFailure(f"{fund_id}: {exc}") from exc
            self._last_seq[fund_id] = events[-1].seq
            return events[-1].seq

    def _read_raw(self, fund_id: str):
        path = self.path_for(fund_id)
        if not path.exists():
            raise UnknownFund(f"no event log for fund {fund_id}")
        expected = 1
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    event = ArenaEvent.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise CorruptLog(f"{fund_id}: unreadable event at seq {expected}: {exc}", seq=expected) from exc
                if event.seq != expected:
                    raise CorruptLog(f"{fund_id}: seq {event.seq} where {expected} expected", seq=expected)
                expected += 1
                yield event

    def read(self, fund_id: str) -> list[ArenaEvent]:
        return list(self._read_raw(fund_id))

    def fold_fund(self, fund_id: str) -> FoldedFund:
        """Deterministic left fold of the log into fund state and NAV series."""
        folded: FoldedFund | None = None
        for event in self._read_raw(fund_id):
            if event.type == "FundCreated":
                folded = FoldedFund(fund=Fund.from_dict(event.payload["fund"]))
            elif folded is None:
                raise CorruptLog(f"{fund_id}: event before FundCreated", seq=event.seq)
            elif event.type == "OrderFilled":
                fill = TradeFill.from_dict(event.payload["fill"])
                cash, positions = apply_fill(folded.fund.cash, folded.fund.positions, fill)
                folded.fund = replace(folded.fund, cash=cash, positions=positions)
            elif event.type == "NavMarked":
                snap = event.payload["nav_snapshot"]
                folded.nav_series.append(
                    (parse_date(snap["as_of"]["trading_date"]), Decimal(snap["nav"]))
                )
            elif event.type == "MemoryAppended":
                entry = MemoryEntry.from_dict(event.payload["entry"])
                folded.fund = append_memory(folded.fund, entry)
            elif event.type == "CycleCompleted":
                folded.completed_dates.append(parse_date(event.payload["trading_date"]))
            elif event.type == "RunControl" and event.payload.get("command") == "MARK_CONTAMINATED":
                folded.contaminated = True
        if folded is None:
            raise UnknownFund(f"fund {fund_id} has no creation event")
        return folded

    def nav_snapshots(self, fund_id: str) -> list[NavSnapshot]:
        snaps = []
        for event in self._read_raw(fund_id):
            if event.type == "NavMarked":
                raw = event.payload["nav_snapshot"]
                snaps.append(
                    NavSnapshot(
                        as_of=AsOf.from_dict(raw["as_of"]),
                        cash=Decimal(raw["cash"]),
                        holdings_value=Decimal(raw["holdings_value"]),
                        nav=Decimal(raw["nav"]),
                    )
                )
        return snaps

    def query(
        self,
        fund_id: str,
        types: set[str] | None = None,
        date_from: date | None = None,
        date_to: date | None = None,
        ticker: str | None = None,
        limit: int = 100,
        offset: int = 0,
    ) -> dict:
        """Filtered page of events in seq order."""
        matches = []
        for event in self._read_raw(fund_id):
            if types and event.type not in types:
                continue
            event_date = (
                parse_date(event.payload["trading_date"])
                if "trading_date" in event.payload
                else event.ts.date()
            )
            if date_from and event_date < date_from:
                continue
            if date_to and event_date > date_to:
                continue
            if ticker and event.payload.get("ticker") != ticker:
                continue
            matches.append(event)
        page = matches[offset : offset + limit]
        return {
            "total": len(matches),
            "limit": limit,
            "offset": offset,
            "events": [event.to_dict() for event in page],
        }
