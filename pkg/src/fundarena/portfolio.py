"""Exact-arithmetic fund state: cash, positions, fills, NAV, trading memory.

All money moves through ``Decimal`` with 6 fractional digits; share counts
are integers. Oversized agent orders are clamped, never rejected, so the
arena keeps running and the adjustment is recorded as a skip or smaller fill.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date
from decimal import Decimal, ROUND_FLOOR
from typing import Mapping

from .clock import AsOf, parse_date
from .errors import (
    BadConfig,
    InvalidPrice,
    MissingPrice,
    OutOfOrderCycle,
    TickerOutsidePool,
    ValidationFailed,
)
from .market_data import validate_ticker
from .numerics import d, fee_for, money_str, q6
from .protocol import ManagerDecision

EXECUTION_POLICIES = ("CLOSE", "NEXT_OPEN")


@dataclass(frozen=True)
class Position:
    ticker: str
    quantity: int
    avg_cost: Decimal

    def to_dict(self) -> dict:
        return {"ticker": self.ticker, "quantity": self.quantity, "avg_cost": money_str(self.avg_cost)}

    @classmethod
    def from_dict(cls, raw: dict) -> "Position":
        return cls(raw["ticker"], int(raw["quantity"]), q6(raw["avg_cost"]))


@dataclass(frozen=True)
class FundConfig:
    max_position_weight: Decimal = Decimal("0.2")
    fee_bps: int = 0
    execution_policy: str = "CLOSE"
    memory_window: int = 10
    allow_short: bool = False

    def validate(self) -> None:
        if not (Decimal(0) < self.max_position_weight <= Decimal(1)):
            raise BadConfig("max_position_weight must be in (0, 1]")
        if self.fee_bps < 0:
            raise BadConfig("fee_bps must be >= 0")
        if self.execution_policy not in EXECUTION_POLICIES:
            raise BadConfig(f"execution_policy must be one of {EXECUTION_POLICIES}")
        if self.memory_window < 1:
            raise BadConfig("memory_window must be >= 1")
        if self.allow_short:
            raise BadConfig("short selling is not supported")

    def to_dict(self) -> dict:
        return {
            "max_position_weight": str(self.max_position_weight),
            "fee_bps": self.fee_bps,
            "execution_policy": self.execution_policy,
            "memory_window": self.memory_window,
            "allow_short": self.allow_short,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FundConfig":
        cfg = cls(
            max_position_weight=d(raw.get("max_position_weight", "0.2")),
            fee_bps=int(raw.get("fee_bps", 0)),
            execution_policy=raw.get("execution_policy", "CLOSE"),
            memory_window=int(raw.get("memory_window", 10)),
            allow_short=bool(raw.get("allow_short", False)),
        )
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class TradeFill:
    ticker: str
    action: str
    quantity: int
    price: Decimal
    fee: Decimal
    executed_at: AsOf

    def notional(self) -> Decimal:
        return self.price * Decimal(self.quantity)

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "action": self.action,
            "quantity": self.quantity,
            "price": money_str(self.price),
            "fee": money_str(self.fee),
            "executed_at": self.executed_at.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TradeFill":
        return cls(
            ticker=raw["ticker"],
            action=raw["action"],
            quantity=int(raw["quantity"]),
            price=q6(raw["price"]),
            fee=q6(raw["fee"]),
            executed_at=AsOf.from_dict(raw["executed_at"]),
        )


@dataclass(frozen=True)
class SkippedDecision:
    ticker: str
    action: str
    requested_quantity: int
    reason: str

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "action": self.action,
            "requested_quantity": self.requested_quantity,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class NavSnapshot:
    as_of: AsOf
    cash: Decimal
    holdings_value: Decimal
    nav: Decimal

    def to_dict(self) -> dict:
        return {
            "as_of": self.as_of.to_dict(),
            "cash": money_str(self.cash),
            "holdings_value": money_str(self.holdings_value),
            "nav": money_str(self.nav),
        }


@dataclass(frozen=True)
class MemoryEntry:
    """One cycle's footprint in the bounded trading memory."""

    trading_date: date
    actions: dict[str, str]
    fills: tuple[str, ...]
    nav: Decimal
    rationale: str

    def to_dict(self) -> dict:
        return {
            "trading_date": self.trading_date.isoformat(),
            "actions": dict(sorted(self.actions.items())),
            "fills": list(self.fills),
            "nav": money_str(self.nav),
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MemoryEntry":
        return cls(
            trading_date=parse_date(raw["trading_date"]),
            actions=dict(raw.get("actions", {})),
            fills=tuple(raw.get("fills", ())),
            nav=q6(raw["nav"]),
            rationale=raw.get("rationale", ""),
        )


@dataclass(frozen=True)
class Fund:
    fund_id: str
    name: str
    model_spec_id: str
    stock_pool: frozenset[str]
    cash: Decimal
    positions: dict[str, Position] = field(default_factory=dict)
    inception: AsOf | None = None
    config: FundConfig = field(default_factory=FundConfig)
    memory: tuple[MemoryEntry, ...] = ()

    def validate(self) -> None:
        if not self.stock_pool:
            raise ValidationFailed("stock_pool must be non-empty")
        for symbol in self.stock_pool:
            validate_ticker(symbol)
        if self.cash < 0:
            raise ValidationFailed("cash must be >= 0")
        for symbol in self.positions:
            if symbol not in self.stock_pool:
                raise ValidationFailed(f"position {symbol} outside stock pool")
        self.config.validate()

    def position_quantity(self, ticker: str) -> int:
        pos = self.positions.get(ticker)
        return pos.quantity if pos else 0

    def to_dict(self) -> dict:
        return {
            "fund_id": self.fund_id,
            "name": self.name,
            "model_spec_id": self.model_spec_id,
            "stock_pool": sorted(self.stock_pool),
            "cash": money_str(self.cash),
            "positions": {t: p.to_dict() for t, p in sorted(self.positions.items())},
            "inception": self.inception.to_dict() if self.inception else None,
            "config": self.config.to_dict(),
            "memory": [entry.to_dict() for entry in self.memory],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Fund":
        return cls(
            fund_id=raw["fund_id"],
            name=raw["name"],
            model_spec_id=raw["model_spec_id"],
            stock_pool=frozenset(raw["stock_pool"]),
            cash=q6(raw["cash"]),
            positions={t: Position.from_dict(p) for t, p in raw.get("positions", {}).items()},
            inception=AsOf.from_dict(raw["inception"]) if raw.get("inception") else None,
            config=FundConfig.from_dict(raw.get("config", {})),
            memory=tuple(MemoryEntry.from_dict(m) for m in raw.get("memory", ())),
        )


@dataclass(frozen=True)
class ExecutionResult:
    fund: "Fund"
    fill: TradeFill | None = None
    skip: SkippedDecision | None = None


def apply_fill(cash: Decimal, positions: dict[str, Position], fill: TradeFill) -> tuple[Decimal, dict[str, Position]]:
    """Apply a fill to (cash, positions); the single source of truth shared
    by execution and by the event-log fold, so replays cannot drift."""
    updated = dict(positions)
    notional = fill.notional()
    if fill.action == "BUY":
        cash = cash - notional - fill.fee
        held = updated.get(fill.ticker)
        if held is None:
            updated[fill.ticker] = Position(fill.ticker, fill.quantity, q6(fill.price))
        else:
            total = held.quantity + fill.quantity
            blended = q6((held.avg_cost * held.quantity + notional) / Decimal(total))
            updated[fill.ticker] = Position(fill.ticker, total, blended)
    elif fill.action == "SELL":
        cash = cash + notional - fill.fee
        held = updated[fill.ticker]
        remaining = held.quantity - fill.quantity
        if remaining > 0:
            updated[fill.ticker] = Position(fill.ticker, remaining, held.avg_cost)
        else:
            del updated[fill.ticker]
    else:
        raise ValidationFailed(f"fill action must be BUY or SELL, got {fill.action}")
    return cash, updated


def _nav_estimate(fund: Fund, decision_ticker: str, fill_price: Decimal, marks: Mapping[str, Decimal] | None) -> Decimal:
    """NAV used for the position-weight clamp.

    Positions are valued at the caller's marks when given (the orchestrator
    passes the day's closes); without marks, the decision ticker uses the
    fill price and everything else its average cost.
    """
    total = fund.cash
    for symbol, pos in fund.positions.items():
        if marks is not None and symbol in marks:
            mark = marks[symbol]
        elif symbol == decision_ticker:
            mark = fill_price
        else:
            mark = pos.avg_cost
        total += mark * Decimal(pos.quantity)
    return total


def _floor_div(numerator: Decimal, denominator: Decimal) -> int:
    return int((numerator / denominator).to_integral_value(rounding=ROUND_FLOOR))


def execute_decision(
    fund: Fund,
    decision: ManagerDecision,
    fill_price: Decimal,
    as_of: AsOf,
    marks: Mapping[str, Decimal] | None = None,
) -> ExecutionResult:
    """Turn a manager decision into at most one fill.

    BUY quantity is clamped so cost+fee fits in cash and the resulting
    position stays under ``max_position_weight`` of NAV; SELL is clamped to
    shares held. A clamp to zero produces no fill and a recorded skip.
    HOLD returns the fund unchanged.
    """
    fill_price = q6(fill_price)
    if fill_price <= 0:
        raise InvalidPrice(f"fill price must be > 0, got {fill_price}")
    if decision.ticker not in fund.stock_pool:
        raise TickerOutsidePool(f"{decision.ticker} not in fund {fund.fund_id} pool")

    if decision.action == "HOLD":
        return ExecutionResult(fund=fund)

    requested = decision.quantity if decision.quantity is not None else 0
    if requested <= 0:
        return ExecutionResult(fund=fund, skip=SkippedDecision(decision.ticker, decision.action, requested, "zero-quantity"))

    fee_bps = fund.config.fee_bps

    if decision.action == "BUY":
        held = fund.position_quantity(decision.ticker)
        nav = _nav_estimate(fund, decision.ticker, fill_price, marks)
        weight_room = _floor_div(fund.config.max_position_weight * nav, fill_price) - held
        quantity = min(requested, max(weight_room, 0))
        while quantity > 0 and fill_price * quantity + fee_for(fill_price, quantity, fee_bps) > fund.cash:
            affordable = _floor_div(fund.cash, fill_price)
            quantity = min(quantity - 1, affordable)
        if quantity <= 0:
            reason = "weight-cap" if weight_room <= 0 else "insufficient-cash"
            return ExecutionResult(fund=fund, skip=SkippedDecision(decision.ticker, "BUY", requested, reason))
        fill = TradeFill(decision.ticker, "BUY", quantity, fill_price, fee_for(fill_price, quantity, fee_bps), as_of)
    else:  # SELL
        held = fund.position_quantity(decision.ticker)
        quantity = min(requested, held)
        if quantity <= 0:
            return ExecutionResult(fund=fund, skip=SkippedDecision(decision.ticker, "SELL", requested, "no-position"))
        fee = fee_for(fill_price, quantity, fee_bps)
        if fill_price * quantity - fee < 0:
            return ExecutionResult(fund=fund, skip=SkippedDecision(decision.ticker, "SELL", requested, "fee-exceeds-proceeds"))
        fill = TradeFill(decision.ticker, "SELL", quantity, fill_price, fee, as_of)

    cash, positions = apply_fill(fund.cash, fund.positions, fill)
    return ExecutionResult(fund=replace(fund, cash=cash, positions=positions), fill=fill)


def mark_to_market(fund: Fund, closes: Mapping[str, Decimal], as_of: AsOf) -> NavSnapshot:
    """Value every held position at its close; nav = cash + holdings exactly."""
    holdings = Decimal(0)
    for symbol, pos in fund.positions.items():
        if symbol not in closes:
            raise MissingPrice(f"no close for held ticker {symbol} on {as_of.trading_date}")
        holdings += q6(closes[symbol]) * Decimal(pos.quantity)
    return NavSnapshot(as_of=as_of, cash=fund.cash, holdings_value=holdings, nav=fund.cash + holdings)


def append_memory(fund: Fund, entry: MemoryEntry) -> Fund:
    """Append one cycle summary, evicting the oldest beyond the window."""
    if fund.memory and entry.trading_date <= fund.memory[-1].trading_date:
        raise OutOfOrderCycle(
            f"memory entry {entry.trading_date} not newer than {fund.memory[-1].trading_date}"
        )
    entries = fund.memory + (entry,)
    window = fund.config.memory_window
    if len(entries) > window:
        entries = entries[-window:]
    return replace(fund, memory=entries)
