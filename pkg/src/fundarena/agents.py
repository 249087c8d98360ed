"""Planner, analyst quartet, and manager: gated context in, decisions out.

Each role renders a versioned prompt template, calls the gateway, and parses
the reply through the structured protocol. Every parse outcome maps to a
well-formed result: a broken plan falls back to full coverage, a broken
signal to NEUTRAL/0, a broken decision to HOLD/0, so the arena never stalls
on a noisy model.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal, ROUND_FLOOR
from pathlib import Path
from string import Template

from .errors import ValidationFailed
from .gateway import ChatRequest, LlmGateway, ModelSpec
from .indicators import IndicatorSet, compute_indicators
from .market_data import FundamentalSnapshot, InsiderTransaction, NewsItem, PriceBar
from .numerics import money_str
from .portfolio import Fund, MemoryEntry, Position, SkippedDecision, TradeFill
from .protocol import (
    ANALYST_KINDS,
    DECISION,
    PLAN,
    SIGNAL,
    AnalystSignal,
    ManagerDecision,
    ParseResult,
    PlannerPlan,
    parse_structured,
)

logger = logging.getLogger(__name__)

PROMPT_DIR = Path(__file__).parent / "prompts"
PROMPT_VERSION = 1
_USER_SEPARATOR = "=== user ==="

NEWS_BODY_LIMIT = 400
MAX_BARS_IN_PROMPT = 30


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    system: str
    user: Template


def load_template(role: str, version: int = PROMPT_VERSION) -> PromptTemplate:
    path = PROMPT_DIR / f"{role}.v{version}.txt"
    text = path.read_text(encoding="utf-8")
    if _USER_SEPARATOR not in text:
        raise ValidationFailed(f"prompt template {path.name} lacks the user separator")
    system, user = text.split(_USER_SEPARATOR, 1)
    return PromptTemplate(f"{role}.v{version}", system.strip(), Template(user.strip()))


@dataclass(frozen=True)
class AgentOutcome:
    """Bookkeeping for one LLM call: cassette key, template, repair trail."""

    call_id: str
    template_id: str
    repairs: tuple[str, ...] = ()
    fallback: str | None = None

    def to_dict(self) -> dict:
        return {
            "call_id": self.call_id,
            "template_id": self.template_id,
            "repairs": list(self.repairs),
            "fallback": self.fallback,
        }


@dataclass(frozen=True)
class ContextSlice:
    """The as-of gated facts an analyst kind is allowed to see."""

    kind: str
    bars: tuple[PriceBar, ...] = ()
    indicators: IndicatorSet | None = None
    fundamentals: FundamentalSnapshot | None = None
    insider_transactions: tuple[InsiderTransaction, ...] = ()
    news: tuple[NewsItem, ...] = ()

    def facts(self) -> list:
        """Everything embedded in the prompt, for leakage auditing."""
        out: list = list(self.bars)
        if self.fundamentals is not None:
            out.append(self.fundamentals)
        out.extend(self.insider_transactions)
        out.extend(self.news)
        return out


def _compact(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _render_bars(bars: tuple[PriceBar, ...]) -> str:
    if not bars:
        return "no price history available"
    return _compact([b.to_dict() for b in bars[-MAX_BARS_IN_PROMPT:]])


def _render_news(items: tuple[NewsItem, ...]) -> str:
    if not items:
        return "no news available"
    rows = []
    for item in items:
        row = item.to_dict()
        row["body"] = row["body"][:NEWS_BODY_LIMIT]
        rows.append(row)
    return _compact(rows)


def _render_memory(memory: tuple[MemoryEntry, ...]) -> str:
    if not memory:
        return "no prior cycles"
    return _compact([entry.to_dict() for entry in memory])


def _render_positions(positions: dict[str, Position]) -> str:
    if not positions:
        return "none"
    return _compact({t: p.to_dict() for t, p in sorted(positions.items())})


def _call(
    gateway: LlmGateway,
    spec: ModelSpec,
    template: PromptTemplate,
    variables: dict[str, str],
    tags: dict[str, str],
    schema_id: str,
) -> tuple[ParseResult, str]:
    """One prompt → completion → strict-parse-with-repair round trip."""
    user = template.user.substitute(variables)
    request = ChatRequest.build(
        system=template.system,
        user=user,
        spec_id=spec.spec_id,
        tags={**tags, "template_id": template.template_id},
    )
    exchange = gateway.complete(request)
    result = parse_structured(exchange.response.text, schema_id)
    if not result.ok:
        # One repair attempt happened inside parse_structured; a second try
        # is pointless against the same recorded text, so fall back.
        logger.warning("%s parse failed (%s): %.120s", schema_id, result.failure, exchange.response.text)
    return result, exchange.request_hash


@dataclass(frozen=True)
class PlanningContext:
    trading_date: date
    stock_pool: tuple[str, ...]
    positions: dict[str, Position]
    memory: tuple[MemoryEntry, ...]
    cash: Decimal
    nav: Decimal
    last_return: float | None


def plan(context: PlanningContext, spec: ModelSpec, gateway: LlmGateway) -> tuple[PlannerPlan, AgentOutcome]:
    """Ask the planner which stocks to evaluate and by which analysts.

    A malformed reply falls back to every pool ticker x all four kinds.
    """
    template = load_template("planner")
    pool = tuple(sorted(context.stock_pool))
    variables = {
        "trading_date": context.trading_date.isoformat(),
        "stock_pool": ", ".join(pool),
        "positions": _render_positions(context.positions),
        "cash": money_str(context.cash),
        "nav": money_str(context.nav),
        "last_return": "n/a" if context.last_return is None else f"{context.last_return:.6f}",
        "memory": _render_memory(context.memory),
    }
    tags = {"role": "planner", "trading_date": context.trading_date.isoformat(), "tickers": ",".join(pool)}
    result, call_id = _call(gateway, spec, template, variables, tags, PLAN)

    if result.ok:
        assignments = {
            ticker: tuple(kinds)
            for ticker, kinds in result.payload["assignments"].items()
            if ticker in context.stock_pool
        }
        dropped = set(result.payload["assignments"]) - set(assignments)
        repairs = list(result.repairs)
        if dropped:
            repairs.append(f"tickers outside pool dropped: {sorted(dropped)}")
        return (
            PlannerPlan(assignments=assignments, rationale=result.payload["rationale"]),
            AgentOutcome(call_id, template.template_id, tuple(repairs)),
        )

    fallback = PlannerPlan(
        assignments={ticker: ANALYST_KINDS for ticker in pool},
        rationale="fallback: full coverage after unparseable plan",
    )
    logger.warning("FallbackPlan engaged: %s", result.failure)
    return fallback, AgentOutcome(call_id, template.template_id, fallback=f"FallbackPlan: {result.failure}")


_SLICE_VARIABLES = {
    "TECHNICAL": ("technical", lambda s: {"bars": _render_bars(s.bars), "indicators": _compact(s.indicators.to_dict()) if s.indicators else "insufficient history"}),
    "FUNDAMENTAL": ("fundamental", lambda s: {"fundamentals": _compact(s.fundamentals.to_dict()) if s.fundamentals else "no fundamental report filed yet"}),
    "INSIDER": ("insider", lambda s: {"insider_transactions": _compact([t.to_dict() for t in s.insider_transactions]) if s.insider_transactions else "no insider filings in window"}),
    "MEDIA": ("media", lambda s: {"news": _render_news(s.news)}),
}


def run_analyst(
    kind: str,
    ticker: str,
    trading_date: date,
    context_slice: ContextSlice,
    spec: ModelSpec,
    gateway: LlmGateway,
) -> tuple[AnalystSignal, AgentOutcome]:
    """One specialist's stance on one ticker from its own data class only."""
    if kind not in ANALYST_KINDS:
        raise ValidationFailed(f"unknown analyst kind {kind!r}")
    role, variables_of = _SLICE_VARIABLES[kind]
    template = load_template(role)
    variables = {"trading_date": trading_date.isoformat(), "ticker": ticker, **variables_of(context_slice)}
    tags = {"role": role, "ticker": ticker, "trading_date": trading_date.isoformat()}
    result, call_id = _call(gateway, spec, template, variables, tags, SIGNAL)

    if result.ok:
        signal = AnalystSignal(
            kind=kind,
            ticker=ticker,
            stance=result.payload["stance"],
            confidence=result.payload["confidence"],
            rationale=result.payload["rationale"],
            key_evidence=tuple(result.payload["key_evidence"]),
        )
        return signal, AgentOutcome(call_id, template.template_id, tuple(result.repairs))

    signal = AnalystSignal(kind=kind, ticker=ticker, stance="NEUTRAL", confidence=0.0, rationale="parse-failure")
    return signal, AgentOutcome(call_id, template.template_id, fallback=f"parse-failure: {result.failure}")


@dataclass(frozen=True)
class ManagerContext:
    trading_date: date
    ticker: str
    position: Position | None
    cash: Decimal
    nav: Decimal
    close: Decimal
    max_position_weight: Decimal
    memory: tuple[MemoryEntry, ...]


def _fallback_quantity(action: str, confidence: float, context: ManagerContext) -> int:
    """Sizing when the model omits quantity: confidence-scaled position."""
    if action == "BUY":
        target_value = Decimal(str(confidence)) * context.max_position_weight * context.nav
        return int((target_value / context.close).to_integral_value(rounding=ROUND_FLOOR))
    if action == "SELL":
        held = context.position.quantity if context.position else 0
        return int((Decimal(str(confidence)) * held).to_integral_value(rounding=ROUND_FLOOR))
    return 0


def manage(
    signals: list[AnalystSignal],
    context: ManagerContext,
    spec: ModelSpec,
    gateway: LlmGateway,
) -> tuple[ManagerDecision, AgentOutcome]:
    """Synthesize the analysts' views into one buy/hold/sell decision."""
    if any(s.ticker != context.ticker for s in signals):
        raise ValidationFailed("manager got signals for a different ticker")
    template = load_template("manager")
    variables = {
        "trading_date": context.trading_date.isoformat(),
        "ticker": context.ticker,
        "signals": _compact([s.to_dict() for s in signals]),
        "position": _compact(context.position.to_dict()) if context.position else "none",
        "cash": money_str(context.cash),
        "nav": money_str(context.nav),
        "close": money_str(context.close),
        "max_position_weight": str(context.max_position_weight),
        "memory": _render_memory(context.memory),
    }
    tags = {"role": "manager", "ticker": context.ticker, "trading_date": context.trading_date.isoformat()}
    result, call_id = _call(gateway, spec, template, variables, tags, DECISION)

    if result.ok:
        action = result.payload["action"]
        confidence = result.payload["confidence"]
        quantity = result.payload["quantity"]
        repairs = list(result.repairs)
        if quantity is None and action != "HOLD":
            quantity = _fallback_quantity(action, confidence, context)
            repairs.append(f"quantity sized by fallback policy: {quantity}")
        decision = ManagerDecision(
            ticker=context.ticker,
            action=action,
            quantity=quantity,
            confidence=confidence,
            rationale=result.payload["rationale"],
        )
        return decision, AgentOutcome(call_id, template.template_id, tuple(repairs))

    decision = ManagerDecision(ticker=context.ticker, action="HOLD", quantity=None, confidence=0.0, rationale="parse-failure")
    return decision, AgentOutcome(call_id, template.template_id, fallback=f"parse-failure: {result.failure}")


@dataclass(frozen=True)
class TickerReport:
    ticker: str
    assigned_kinds: tuple[str, ...]
    signals: tuple[AnalystSignal, ...]
    decision: ManagerDecision
    fill: TradeFill | None
    skip: SkippedDecision | None

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "assigned_kinds": list(self.assigned_kinds),
            "signals": [s.to_dict() for s in self.signals],
            "decision": self.decision.to_dict(),
            "fill": self.fill.to_dict() if self.fill else None,
            "skip": self.skip.to_dict() if self.skip else None,
        }


@dataclass(frozen=True)
class DecisionReport:
    trading_date: date
    plan_rationale: str
    tickers: tuple[TickerReport, ...]
    no_action_day: bool

    def to_dict(self) -> dict:
        return {
            "trading_date": self.trading_date.isoformat(),
            "plan_rationale": self.plan_rationale,
            "tickers": [t.to_dict() for t in self.tickers],
            "no_action_day": self.no_action_day,
        }


def render_report(
    trading_date: date,
    plan_result: PlannerPlan,
    signals: dict[str, list[AnalystSignal]],
    decisions: dict[str, ManagerDecision],
    fills: dict[str, TradeFill],
    skips: dict[str, SkippedDecision] | None = None,
) -> DecisionReport:
    """Lossless assembly of one cycle's reasoning; no signal is dropped."""
    skips = skips or {}
    rows = []
    for ticker in sorted(plan_result.assignments):
        rows.append(
            TickerReport(
                ticker=ticker,
                assigned_kinds=tuple(plan_result.assignments[ticker]),
                signals=tuple(signals.get(ticker, ())),
                decision=decisions[ticker],
                fill=fills.get(ticker),
                skip=skips.get(ticker),
            )
        )
    return DecisionReport(
        trading_date=trading_date,
        plan_rationale=plan_result.rationale,
        tickers=tuple(rows),
        no_action_day=not rows,
    )


def build_context_slice(
    kind: str,
    store,
    ticker: str,
    as_of,
    price_lookback_days: int = 60,
    news_window_days: int = 7,
    insider_window_days: int = 30,
) -> ContextSlice:
    """Fetch the as-of gated facts for one analyst kind.

    Slices are disjoint by design: each specialist sees only its data class.
    """
    if kind == "TECHNICAL":
        bars = tuple(store.get_price_bars(ticker, price_lookback_days, as_of))
        return ContextSlice(kind=kind, bars=bars, indicators=compute_indicators(bars))
    if kind == "FUNDAMENTAL":
        return ContextSlice(kind=kind, fundamentals=store.get_fundamentals(ticker, as_of))
    if kind == "INSIDER":
        return ContextSlice(kind=kind, insider_transactions=tuple(store.get_insider_transactions(ticker, insider_window_days, as_of)))
    if kind == "MEDIA":
        return ContextSlice(kind=kind, news=tuple(store.get_news(ticker, news_window_days, as_of)))
    raise ValidationFailed(f"unknown analyst kind {kind!r}")
