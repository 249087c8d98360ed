"""The trading-cycle engine: one plan→analyze→decide→execute→mark pass per
fund per trading day, a forward-only clock, replay over fixture ranges, and
the run lifecycle (pause/resume/abort) behind the operator surface.

Fail-closed by design: a cycle that cannot finish (model down, cassette
miss, missing price, gating violation) writes CycleStarted+CycleFailed and
leaves fund state untouched; nothing is ever guessed.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from decimal import Decimal

from . import agents
from .agents import AgentOutcome, ContextSlice, DecisionReport, ManagerContext, PlanningContext
from .clock import DEFAULT_SAMPLE_TIME_UTC, AsOf, format_instant
from .errors import (
    ArenaError,
    CutoffViolation,
    CycleFailed,
    DatasetGap,
    FundBusy,
    IllegalTransition,
    LeakageDetected,
    MissingPrice,
    NotTradingDay,
    OutOfOrderCycle,
    ProviderUnavailable,
    UnknownRun,
)
from .events import ArenaEvent, EventStore, canonical_json
from .gateway import LlmGateway, ModelSpec
from .market_data import MarketDataStore, audit_leakage
from .metrics import MetricsReport, compute_metrics
from .portfolio import (
    Fund,
    MemoryEntry,
    NavSnapshot,
    SkippedDecision,
    TradeFill,
    append_memory,
    execute_decision,
    mark_to_market,
)
from .protocol import AnalystSignal, ManagerDecision, PlannerPlan

logger = logging.getLogger(__name__)

LIVE, REPLAY = "LIVE", "REPLAY"
RUN_STATUSES = ("CREATED", "RUNNING", "PAUSED", "COMPLETED", "FAILED")
_LEGAL = {
    ("CREATED", "RUNNING"),
    ("RUNNING", "PAUSED"),
    ("PAUSED", "RUNNING"),
    ("RUNNING", "COMPLETED"),
    ("RUNNING", "FAILED"),
    ("PAUSED", "FAILED"),
    ("CREATED", "FAILED"),
}

MAX_ANALYST_WORKERS = 4


@dataclass
class ArenaRun:
    run_id: str
    fund_id: str
    mode: str
    status: str = "CREATED"
    clock: AsOf | None = None
    date_range: tuple[date, date] | None = None
    contaminated: bool = False
    error: str | None = None
    cycles_done: int = 0

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "fund_id": self.fund_id,
            "mode": self.mode,
            "status": self.status,
            "clock": self.clock.to_dict() if self.clock else None,
            "date_range": [d.isoformat() for d in self.date_range] if self.date_range else None,
            "contaminated": self.contaminated,
            "error": self.error,
            "cycles_done": self.cycles_done,
        }


@dataclass
class _RunHandle:
    run: ArenaRun
    lock: threading.Lock = field(default_factory=threading.Lock)
    pause_requested: threading.Event = field(default_factory=threading.Event)
    resume: threading.Event = field(default_factory=threading.Event)
    abort: threading.Event = field(default_factory=threading.Event)
    thread: threading.Thread | None = None

    def transition(self, new_status: str) -> None:
        with self.lock:
            if (self.run.status, new_status) not in _LEGAL:
                raise IllegalTransition(f"{self.run.status} -> {new_status}")
            self.run.status = new_status


@dataclass(frozen=True)
class CycleRecord:
    """One trading day's complete trace; partial cycles never produce one."""

    trading_date: date
    plan: PlannerPlan
    plan_outcome: AgentOutcome
    signals: dict[str, tuple[AnalystSignal, ...]]
    signal_outcomes: dict[str, tuple[AgentOutcome, ...]]
    decisions: dict[str, ManagerDecision]
    decision_outcomes: dict[str, AgentOutcome]
    fills: dict[str, TradeFill]
    skips: dict[str, SkippedDecision]
    nav_snapshot: NavSnapshot
    report: DecisionReport
    llm_call_ids: tuple[str, ...]
    timings: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "trading_date": self.trading_date.isoformat(),
            "plan": self.plan.to_dict(),
            "plan_outcome": self.plan_outcome.to_dict(),
            "signals": {t: [s.to_dict() for s in sigs] for t, sigs in sorted(self.signals.items())},
            "signal_outcomes": {t: [o.to_dict() for o in outs] for t, outs in sorted(self.signal_outcomes.items())},
            "decisions": {t: d.to_dict() for t, d in sorted(self.decisions.items())},
            "decision_outcomes": {t: o.to_dict() for t, o in sorted(self.decision_outcomes.items())},
            "fills": {t: f.to_dict() for t, f in sorted(self.fills.items())},
            "skips": {t: s.to_dict() for t, s in sorted(self.skips.items())},
            "nav_snapshot": self.nav_snapshot.to_dict(),
            "report": self.report.to_dict(),
            "llm_call_ids": list(self.llm_call_ids),
            "timings": dict(self.timings),
        }

    def canonical(self) -> str:
        return canonical_json(self.to_dict())


class ArenaOrchestrator:
    """Owns the per-fund cycle locks, the run registry, and the event clock."""

    def __init__(
        self,
        market: MarketDataStore,
        events: EventStore,
        gateway: LlmGateway,
        sample_time=DEFAULT_SAMPLE_TIME_UTC,
        price_lookback_days: int = 60,
        news_window_days: int = 7,
        insider_window_days: int = 30,
    ):
        self.market = market
        self.events = events
        self.gateway = gateway
        self.sample_time = sample_time
        self.price_lookback_days = price_lookback_days
        self.news_window_days = news_window_days
        self.insider_window_days = insider_window_days
        self._fund_locks: dict[str, threading.Lock] = {}
        self._runs: dict[str, _RunHandle] = {}
        self._registry_lock = threading.Lock()

    # -- registry plumbing --

    def _fund_lock(self, fund_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._fund_locks.setdefault(fund_id, threading.Lock())

    def _register_run(self, run: ArenaRun) -> _RunHandle:
        handle = _RunHandle(run=run)
        with self._registry_lock:
            self._runs[run.run_id] = handle
        return handle

    def get_run(self, run_id: str) -> ArenaRun:
        with self._registry_lock:
            handle = self._runs.get(run_id)
        if handle is not None:
            return handle.run
        # Terminal runs survive restarts in the event logs.
        for fund_id in self.events.list_funds():
            for event in self.events.read(fund_id):
                if event.type == "RunControl" and event.payload.get("run_id") == run_id:
                    return self._run_from_events(fund_id, run_id)
        raise UnknownRun(f"run {run_id} not found")

    def _run_from_events(self, fund_id: str, run_id: str) -> ArenaRun:
        run = ArenaRun(run_id=run_id, fund_id=fund_id, mode=REPLAY)
        for event in self.events.read(fund_id):
            payload = event.payload
            if payload.get("run_id") != run_id:
                continue
            if event.type == "RunControl":
                command = payload.get("command")
                if command == "RUN_STARTED":
                    run.mode = payload.get("mode", REPLAY)
                    run.status = "RUNNING"
                    if payload.get("from") and payload.get("to"):
                        run.date_range = (date.fromisoformat(payload["from"]), date.fromisoformat(payload["to"]))
                elif command == "RUN_COMPLETED":
                    run.status = "COMPLETED"
                elif command == "RUN_FAILED":
                    run.status = "FAILED"
                    run.error = payload.get("cause")
                elif command == "MARK_CONTAMINATED":
                    run.contaminated = True
            elif event.type == "CycleCompleted":
                run.cycles_done += 1
        return run

    def list_runs(self) -> list[ArenaRun]:
        with self._registry_lock:
            return [handle.run for handle in self._runs.values()]

    # -- clock --

    def as_of_for(self, trading_date: date) -> AsOf:
        return AsOf.at_sample_time(trading_date, self.sample_time)

    def _event_ts(self, mode: str, as_of: AsOf) -> datetime:
        # Replay events are stamped with the simulated instant so reruns are
        # byte-identical; live events carry wall-clock time.
        if mode == REPLAY:
            return as_of.instant
        return datetime.now(timezone.utc)

    # -- fund state --

    def current_fund(self, fund_id: str) -> Fund:
        return self.events.fold_fund(fund_id).fund

    def fund_metrics(self, fund_id: str, rf_annual: float = 0.0) -> MetricsReport:
        folded = self.events.fold_fund(fund_id)
        fills = [
            TradeFill.from_dict(e.payload["fill"])
            for e in self.events.read(fund_id)
            if e.type == "OrderFilled"
        ]
        return compute_metrics(folded.nav_series, fills, rf_annual)

    # -- single cycle --

    def run_cycle(self, fund_id: str, trading_date: date, run_id: str | None = None, mode: str = REPLAY, market: MarketDataStore | None = None) -> CycleRecord:
        """Run one complete trading cycle and persist it atomically."""
        lock = self._fund_lock(fund_id)
        if not lock.acquire(blocking=False):
            raise FundBusy(f"fund {fund_id} has a cycle in flight")
        try:
            folded = self.events.fold_fund(fund_id)
            record, _ = self._cycle_inner(
                fund=folded.fund,
                trading_date=trading_date,
                run_id=run_id or f"cycle-{fund_id}-{trading_date.isoformat()}",
                mode=mode,
                last_cycle_date=max(folded.completed_dates) if folded.completed_dates else None,
                nav_series=folded.nav_series,
                market=market or self.market,
            )
            return record
        finally:
            lock.release()

    def _cycle_inner(
        self,
        fund: Fund,
        trading_date: date,
        run_id: str,
        mode: str,
        last_cycle_date: date | None,
        nav_series: list[tuple[date, Decimal]],
        market: MarketDataStore,
    ) -> tuple[CycleRecord, Fund]:
        pool = sorted(fund.stock_pool)
        if trading_date not in set(market.trading_days(pool)):
            raise NotTradingDay(f"{trading_date} has no bars for pool of fund {fund.fund_id}")
        if last_cycle_date is not None and trading_date <= last_cycle_date:
            raise OutOfOrderCycle(f"{trading_date} not after last completed cycle {last_cycle_date}")

        as_of = self.as_of_for(trading_date)
        ts = self._event_ts(mode, as_of)
        seq = self.events.last_seq(fund.fund_id)
        pending: list[ArenaEvent] = []

        def emit(event_type: str, payload: dict) -> None:
            nonlocal seq
            seq += 1
            pending.append(ArenaEvent(seq=seq, ts=ts, type=event_type, payload=payload))

        emit("CycleStarted", {"trading_date": trading_date.isoformat(), "as_of": as_of.to_dict(), "run_id": run_id})

        clock = time.monotonic if mode == LIVE else (lambda: 0.0)
        timings: dict[str, int] = {}
        started = clock()
        try:
            record, fund_after = self._execute_phases(fund, as_of, market, nav_series, emit, timings, clock, run_id)
        except ArenaError as exc:
            failure = ArenaEvent(
                seq=pending[0].seq + 1,
                ts=ts,
                type="CycleFailed",
                payload={
                    "trading_date": trading_date.isoformat(),
                    "run_id": run_id,
                    "cause_code": exc.code,
                    "cause": exc.message,
                },
            )
            self.events.append(fund.fund_id, [pending[0], failure])
            logger.error("cycle %s/%s failed: %s", fund.fund_id, trading_date, exc.message)
            raise CycleFailed(f"{trading_date}: {exc.message}", cause=exc) from exc

        timings["total_ms"] = int((clock() - started) * 1000)
        emit(
            "CycleCompleted",
            {
                "trading_date": trading_date.isoformat(),
                "run_id": run_id,
                "llm_call_ids": list(record.llm_call_ids),
                "n_fills": len(record.fills),
                "nav": record.nav_snapshot.to_dict()["nav"],
            },
        )
        self.events.append(fund.fund_id, pending)
        return record, fund_after

    def _pending_decisions(self, fund_id: str) -> list[ManagerDecision]:
        """Decisions of the most recent completed cycle (NEXT_OPEN deferral)."""
        latest: list[ManagerDecision] = []
        collecting: list[ManagerDecision] = []
        for event in self.events.read(fund_id):
            if event.type == "CycleStarted":
                collecting = []
            elif event.type == "DecisionMade":
                collecting.append(ManagerDecision(**event.payload["decision"]))
            elif event.type == "CycleCompleted":
                latest = collecting
        return latest

    def _execute_phases(self, fund: Fund, as_of: AsOf, market: MarketDataStore, nav_series, emit, timings, clock, run_id) -> tuple[CycleRecord, Fund]:
        trading_date = as_of.trading_date
        pool = sorted(fund.stock_pool)
        spec = self.gateway.model(fund.model_spec_id)
        call_ids: list[str] = []

        # Phase 1: gated context. Every pool ticker must have a close today;
        # a hole fails the cycle rather than guessing a price.
        t0 = clock()
        closes = market.close_prices(pool, as_of)
        missing = [t for t in pool if t not in closes]
        if missing:
            raise MissingPrice(f"no close on {trading_date} for {', '.join(missing)}")

        fills: dict[str, TradeFill] = {}
        skips: dict[str, SkippedDecision] = {}
        defer_execution = fund.config.execution_policy == "NEXT_OPEN"
        if defer_execution:
            # Yesterday's decisions fill at today's open, the first price at
            # which they could really have traded.
            opens = {}
            for ticker in pool:
                bars = market.get_price_bars(ticker, 1, as_of)
                if bars and bars[-1].date == trading_date:
                    opens[ticker] = bars[-1].open
            for decision in self._pending_decisions(fund.fund_id):
                if decision.action == "HOLD" or decision.ticker not in opens:
                    continue
                result = execute_decision(fund, decision, opens[decision.ticker], as_of, marks=opens)
                fund = result.fund
                if result.fill:
                    fills[decision.ticker] = result.fill
                    emit("OrderFilled", {"trading_date": trading_date.isoformat(), "ticker": decision.ticker, "fill": result.fill.to_dict()})
                if result.skip:
                    skips[decision.ticker] = result.skip
                    emit("OrderSkipped", {"trading_date": trading_date.isoformat(), "ticker": decision.ticker, "skip": result.skip.to_dict()})

        nav_before = mark_to_market(fund, closes, as_of).nav
        last_return = None
        if nav_series:
            prev_nav = nav_series[-1][1]
            last_return = float(nav_before / prev_nav) - 1.0
        timings["phase1_ms"] = int((clock() - t0) * 1000)

        # Phase 2: plan, then the analyst fan-out (bounded concurrency).
        t0 = clock()
        planning = PlanningContext(
            trading_date=trading_date,
            stock_pool=tuple(pool),
            positions=fund.positions,
            memory=fund.memory,
            cash=fund.cash,
            nav=nav_before,
            last_return=last_return,
        )
        plan_result, plan_outcome = agents.plan(planning, spec, self.gateway)
        call_ids.append(plan_outcome.call_id)
        emit("PlanMade", {"trading_date": trading_date.isoformat(), "plan": plan_result.to_dict(), "outcome": plan_outcome.to_dict()})

        assignments = sorted(
            (ticker, kind)
            for ticker, kinds in plan_result.assignments.items()
            for kind in kinds
        )
        slices: dict[tuple[str, str], ContextSlice] = {}
        for ticker, kind in assignments:
            sl = agents.build_context_slice(
                kind,
                market,
                ticker,
                as_of,
                price_lookback_days=self.price_lookback_days,
                news_window_days=self.news_window_days,
                insider_window_days=self.insider_window_days,
            )
            violations = audit_leakage(as_of, sl.facts())
            if violations:
                raise LeakageDetected("; ".join(v.describe() for v in violations))
            slices[(ticker, kind)] = sl

        signal_results: dict[tuple[str, str], tuple[AnalystSignal, AgentOutcome]] = {}
        if assignments:
            with ThreadPoolExecutor(max_workers=MAX_ANALYST_WORKERS) as pool_exec:
                futures = {
                    (ticker, kind): pool_exec.submit(
                        agents.run_analyst, kind, ticker, trading_date, slices[(ticker, kind)], spec, self.gateway
                    )
                    for ticker, kind in assignments
                }
                for key, future in futures.items():
                    signal_results[key] = future.result()

        signals: dict[str, tuple[AnalystSignal, ...]] = {}
        signal_outcomes: dict[str, tuple[AgentOutcome, ...]] = {}
        for ticker, kind in assignments:  # deterministic event order
            signal, outcome = signal_results[(ticker, kind)]
            signals[ticker] = signals.get(ticker, ()) + (signal,)
            signal_outcomes[ticker] = signal_outcomes.get(ticker, ()) + (outcome,)
            call_ids.append(outcome.call_id)
            emit(
                "SignalEmitted",
                {
                    "trading_date": trading_date.isoformat(),
                    "ticker": ticker,
                    "signal": signal.to_dict(),
                    "outcome": outcome.to_dict(),
                },
            )
        timings["phase2_ms"] = int((clock() - t0) * 1000)

        # Phase 3: manage, execute, mark, remember. Sequential per ticker so
        # each decision sees cash already committed earlier in the cycle.
        t0 = clock()
        decisions: dict[str, ManagerDecision] = {}
        decision_outcomes: dict[str, AgentOutcome] = {}
        working = fund
        for ticker in sorted(plan_result.assignments):
            nav_now = mark_to_market(working, closes, as_of).nav
            context = ManagerContext(
                trading_date=trading_date,
                ticker=ticker,
                position=working.positions.get(ticker),
                cash=working.cash,
                nav=nav_now,
                close=closes[ticker],
                max_position_weight=working.config.max_position_weight,
                memory=working.memory,
            )
            decision, outcome = agents.manage(list(signals.get(ticker, ())), context, spec, self.gateway)
            decisions[ticker] = decision
            decision_outcomes[ticker] = outcome
            call_ids.append(outcome.call_id)
            emit(
                "DecisionMade",
                {
                    "trading_date": trading_date.isoformat(),
                    "ticker": ticker,
                    "decision": decision.to_dict(),
                    "outcome": outcome.to_dict(),
                },
            )
            if defer_execution:
                continue
            result = execute_decision(working, decision, closes[ticker], as_of, marks=closes)
            working = result.fund
            if result.fill:
                fills[ticker] = result.fill
                emit("OrderFilled", {"trading_date": trading_date.isoformat(), "ticker": ticker, "fill": result.fill.to_dict()})
            if result.skip:
                skips[ticker] = result.skip
                emit("OrderSkipped", {"trading_date": trading_date.isoformat(), "ticker": ticker, "skip": result.skip.to_dict()})

        snapshot = mark_to_market(working, closes, as_of)
        emit("NavMarked", {"trading_date": trading_date.isoformat(), "nav_snapshot": snapshot.to_dict()})

        entry = MemoryEntry(
            trading_date=trading_date,
            actions={t: d.action for t, d in decisions.items()},
            fills=tuple(
                f"{f.action} {f.quantity} {f.ticker} @ {f.to_dict()['price']}" for _, f in sorted(fills.items())
            ),
            nav=snapshot.nav,
            rationale="; ".join(f"{t}: {decisions[t].rationale}" for t in sorted(decisions))[:300],
        )
        working = append_memory(working, entry)
        emit("MemoryAppended", {"trading_date": trading_date.isoformat(), "entry": entry.to_dict()})
        timings["phase3_ms"] = int((clock() - t0) * 1000)

        # Under NEXT_OPEN, today's decisions have no resulting fill yet; the
        # fills recorded above belong to the previous cycle's decisions.
        report_fills = {} if defer_execution else fills
        report_skips = {} if defer_execution else skips
        report = agents.render_report(trading_date, plan_result, {t: list(s) for t, s in signals.items()}, decisions, report_fills, report_skips)
        record = CycleRecord(
            trading_date=trading_date,
            plan=plan_result,
            plan_outcome=plan_outcome,
            signals=signals,
            signal_outcomes=signal_outcomes,
            decisions=decisions,
            decision_outcomes=decision_outcomes,
            fills=fills,
            skips=skips,
            nav_snapshot=snapshot,
            report=report,
            llm_call_ids=tuple(call_ids),
            timings=timings,
        )
        return record, working

    # -- replay over a date range --

    def check_cutoff(self, spec: ModelSpec, dataset_start: date | None, allow_contaminated: bool) -> bool:
        """The contamination rule as a mechanical check.

        Returns True when the run must be stamped CONTAMINATED.
        """
        if spec.knowledge_cutoff is None or dataset_start is None:
            return False
        if spec.knowledge_cutoff >= dataset_start:
            if not allow_contaminated:
                raise CutoffViolation(
                    f"model cutoff {spec.knowledge_cutoff} overlaps dataset starting {dataset_start}; "
                    "pass allow_contaminated to run anyway"
                )
            return True
        return False

    def _trading_days_in(self, pool: list[str], from_date: date, to_date: date, market: MarketDataStore) -> list[date]:
        days = [d for d in market.trading_days(pool) if from_date <= d <= to_date]
        if not days:
            raise DatasetGap(f"no trading days with bars between {from_date} and {to_date}")
        for day in days:
            as_of = self.as_of_for(day)
            have = market.close_prices(pool, as_of)
            holes = [t for t in pool if t not in have]
            if holes:
                raise DatasetGap(f"{day.isoformat()}: no bar for {', '.join(holes)}")
        return days

    def run_replay(
        self,
        fund_id: str,
        from_date: date,
        to_date: date,
        run_id: str | None = None,
        allow_contaminated: bool = False,
        handle: _RunHandle | None = None,
        store_for_day=None,
    ) -> tuple[ArenaRun, list[CycleRecord]]:
        """One cycle per trading day in range, stopping at the first failure.

        ``store_for_day`` is a hardening hook: tests swap in censored or
        mutated datasets per day to falsify the gating.
        """
        run_id = run_id or f"replay-{fund_id}-{from_date.isoformat()}-{to_date.isoformat()}"
        lock = self._fund_lock(fund_id)
        if not lock.acquire(blocking=False):
            raise FundBusy(f"fund {fund_id} already has a run in flight")
        recording = self.gateway.mode == "record"
        if recording:
            self.gateway.use_cassette(run_id)
        try:
            folded = self.events.fold_fund(fund_id)
            fund = folded.fund
            spec = self.gateway.model(fund.model_spec_id)
            pool = sorted(fund.stock_pool)
            contaminated = self.check_cutoff(spec, self.market.dataset_start(), allow_contaminated)
            days = self._trading_days_in(pool, from_date, to_date, self.market)

            if handle is None:
                handle = self._register_run(ArenaRun(run_id=run_id, fund_id=fund_id, mode=REPLAY, date_range=(from_date, to_date)))
            run = handle.run
            run.contaminated = contaminated
            handle.transition("RUNNING")

            start_ts = self.as_of_for(days[0]).instant
            seq = self.events.last_seq(fund_id)
            run_events = [
                ArenaEvent(
                    seq=seq + 1,
                    ts=start_ts,
                    type="RunControl",
                    payload={
                        "command": "RUN_STARTED",
                        "run_id": run_id,
                        "mode": REPLAY,
                        "from": from_date.isoformat(),
                        "to": to_date.isoformat(),
                    },
                )
            ]
            if contaminated:
                run_events.append(
                    ArenaEvent(
                        seq=seq + 2,
                        ts=start_ts,
                        type="RunControl",
                        payload={"command": "MARK_CONTAMINATED", "run_id": run_id},
                    )
                )
            self.events.append(fund_id, run_events)

            records: list[CycleRecord] = []
            last_date = max(folded.completed_dates) if folded.completed_dates else None
            nav_series = list(folded.nav_series)
            failure: ArenaError | None = None
            final_status = "COMPLETED"
            for day in days:
                if handle.abort.is_set():
                    final_status = "FAILED"
                    run.error = "aborted"
                    break
                if handle.pause_requested.is_set():
                    handle.transition("PAUSED")
                    handle.resume.wait()
                    handle.resume.clear()
                    handle.pause_requested.clear()
                    if handle.abort.is_set():
                        final_status = "FAILED"
                        run.error = "aborted"
                        break
                    handle.transition("RUNNING")
                market = store_for_day(day) if store_for_day else self.market
                try:
                    record, fund = self._cycle_inner(
                        fund=fund,
                        trading_date=day,
                        run_id=run_id,
                        mode=REPLAY,
                        last_cycle_date=last_date,
                        nav_series=nav_series,
                        market=market,
                    )
                except CycleFailed as exc:
                    failure = exc
                    final_status = "FAILED"
                    run.error = exc.message
                    break
                records.append(record)
                nav_series.append((day, record.nav_snapshot.nav))
                last_date = day
                run.cycles_done += 1
                run.clock = self.as_of_for(day)

            end_ts = run.clock.instant if run.clock else start_ts
            self.events.append(
                fund_id,
                [
                    ArenaEvent(
                        seq=self.events.last_seq(fund_id) + 1,
                        ts=end_ts,
                        type="RunControl",
                        payload={
                            "command": "RUN_COMPLETED" if final_status == "COMPLETED" else "RUN_FAILED",
                            "run_id": run_id,
                            "cycles": len(records),
                            "cause": run.error,
                        },
                    )
                ],
            )
            handle.transition(final_status)
            return run, records
        finally:
            if recording:
                self.gateway.release_cassette(run_id)
            lock.release()

    def start_cycle_async(self, fund_id: str, trading_date: date) -> ArenaRun:
        """202 path for a single cycle: spawn it and return the run to poll."""
        run_id = f"cycle-{fund_id}-{trading_date.isoformat()}-{uuid.uuid4().hex[:8]}"
        handle = self._register_run(
            ArenaRun(run_id=run_id, fund_id=fund_id, mode=REPLAY, date_range=(trading_date, trading_date))
        )

        def _target():
            handle.transition("RUNNING")
            try:
                self.run_cycle(fund_id, trading_date, run_id=run_id)
                handle.run.cycles_done = 1
                handle.transition("COMPLETED")
            except ArenaError as exc:
                handle.run.error = exc.message
                with handle.lock:
                    handle.run.status = "FAILED"

        handle.thread = threading.Thread(target=_target, daemon=True)
        handle.thread.start()
        return handle.run

    def start_replay_async(self, fund_id: str, from_date: date, to_date: date, run_id: str | None = None, allow_contaminated: bool = False) -> ArenaRun:
        """API-facing 202 path: spawn the replay and return immediately."""
        run_id = run_id or f"replay-{fund_id}-{from_date.isoformat()}-{to_date.isoformat()}-{uuid.uuid4().hex[:8]}"
        handle = self._register_run(ArenaRun(run_id=run_id, fund_id=fund_id, mode=REPLAY, date_range=(from_date, to_date)))

        def _target():
            try:
                self.run_replay(fund_id, from_date, to_date, run_id=run_id, allow_contaminated=allow_contaminated, handle=handle)
            except ArenaError as exc:
                with handle.lock:
                    if handle.run.status in ("CREATED", "RUNNING", "PAUSED"):
                        handle.run.status = "FAILED"
                    handle.run.error = exc.message

        handle.thread = threading.Thread(target=_target, daemon=True)
        handle.thread.start()
        return handle.run

    def schedule_live(self, fund_id: str, at_time_utc=None, provider=None, poll_interval_s: float = 60.0) -> "LiveScheduler":
        """Create (without starting) the daily live trigger for a fund."""
        scheduler = LiveScheduler(
            self, fund_id, provider=provider, poll_interval_s=poll_interval_s, at_time_utc=at_time_utc
        )
        self._register_run(scheduler.run)
        return scheduler

    # -- run lifecycle --

    def control(self, run_id: str, command: str) -> ArenaRun:
        """PAUSE takes effect at the next cycle boundary; ABORT finishes or
        fails the in-flight cycle, then marks the run FAILED(aborted)."""
        with self._registry_lock:
            handle = self._runs.get(run_id)
        if handle is None:
            raise UnknownRun(f"run {run_id} not active")
        run = handle.run
        if command == "PAUSE":
            if run.status != "RUNNING":
                raise IllegalTransition(f"cannot PAUSE a {run.status} run")
            handle.pause_requested.set()
        elif command == "RESUME":
            if run.status not in ("PAUSED", "RUNNING"):
                raise IllegalTransition(f"cannot RESUME a {run.status} run")
            handle.resume.set()
        elif command == "ABORT":
            if run.status not in ("CREATED", "RUNNING", "PAUSED"):
                raise IllegalTransition(f"cannot ABORT a {run.status} run")
            handle.abort.set()
            handle.resume.set()
        else:
            raise IllegalTransition(f"unknown command {command!r}")
        return run


class LiveScheduler:
    """Day-by-day live trigger with catch-up after downtime.

    ``tick`` is side-effect driven and injectable-clock friendly: it finds
    every trading day whose data became available since the last completed
    cycle and runs them in order, each with its historical as-of. A provider
    outage defers the day (retried on a later tick) instead of skipping it.
    ``at_time_utc`` is the daily trigger point; cycles themselves are always
    stamped with the orchestrator's canonical sample time.
    """

    def __init__(
        self,
        orchestrator: ArenaOrchestrator,
        fund_id: str,
        provider=None,
        now=lambda: datetime.now(timezone.utc),
        poll_interval_s: float = 60.0,
        at_time_utc=None,
    ):
        self.orchestrator = orchestrator
        self.fund_id = fund_id
        self.provider = provider
        self.now = now
        self.poll_interval_s = poll_interval_s
        self.at_time_utc = at_time_utc or orchestrator.sample_time
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.run = ArenaRun(run_id=f"live-{fund_id}", fund_id=fund_id, mode=LIVE)

    def due_days(self) -> list[date]:
        folded = self.orchestrator.events.fold_fund(self.fund_id)
        fund = folded.fund
        last = max(folded.completed_dates) if folded.completed_dates else None
        instant = self.now()
        days = []
        for day in self.orchestrator.market.trading_days(sorted(fund.stock_pool)):
            if last is not None and day <= last:
                continue
            trigger = datetime.combine(day, self.at_time_utc, tzinfo=timezone.utc)
            if max(trigger, self.orchestrator.as_of_for(day).instant) <= instant:
                days.append(day)
        return days

    def tick(self) -> list[CycleRecord]:
        fund = self.orchestrator.current_fund(self.fund_id)
        if self.provider is not None:
            try:
                as_of = AsOf(self.now(), self.now().date())
                self.provider.refresh(sorted(fund.stock_pool), as_of)
            except ProviderUnavailable as exc:
                logger.warning("provider unavailable, deferring cycles: %s", exc.message)
                return []
        records = []
        for day in self.due_days():
            try:
                records.append(
                    self.orchestrator.run_cycle(self.fund_id, day, run_id=self.run.run_id, mode=LIVE)
                )
                self.run.cycles_done += 1
                self.run.clock = self.orchestrator.as_of_for(day)
            except CycleFailed:
                break
        return records

    def start(self) -> None:
        self.run.status = "RUNNING"

        def _loop():
            while not self._stop.wait(self.poll_interval_s):
                self.tick()

        self._thread = threading.Thread(target=_loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5)
        self.run.status = "COMPLETED"
