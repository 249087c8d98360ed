"""Pipeline roles: prompts render gated context, replies parse or fall back."""

from __future__ import annotations

import json
from datetime import date
from decimal import Decimal

import pytest

from fundarena.agents import (
    ContextSlice,
    ManagerContext,
    PlanningContext,
    build_context_slice,
    load_template,
    manage,
    plan,
    render_report,
    run_analyst,
)
from fundarena.clock import AsOf
from fundarena.gateway import LlmGateway, ModelSpec, ProviderProfile
from fundarena.market_data import audit_leakage
from fundarena.numerics import q6
from fundarena.portfolio import Position, SkippedDecision, TradeFill
from fundarena.protocol import ANALYST_KINDS, AnalystSignal, ManagerDecision, PlannerPlan

DAY = date(2025, 6, 10)


def scripted_gateway(tmp_path, responder):
    gw = LlmGateway(cassette_dir=tmp_path / "cassettes")
    gw.register_provider(ProviderProfile(name="test", wire_dialect="scripted", responder=responder))
    gw.register_model(ModelSpec(spec_id="t1", provider="test", model_name="scripted"))
    return gw, gw.model("t1")


def fixed(text):
    return lambda request, spec: text


def planning_context(pool=("AAPL", "MSFT")):
    return PlanningContext(
        trading_date=DAY,
        stock_pool=tuple(pool),
        positions={},
        memory=(),
        cash=q6(10000),
        nav=q6(10000),
        last_return=None,
    )


def manager_context(position=None, cash="10000", nav="10000", close="100", weight="0.2"):
    return ManagerContext(
        trading_date=DAY,
        ticker="AAPL",
        position=position,
        cash=q6(cash),
        nav=q6(nav),
        close=q6(close),
        max_position_weight=Decimal(weight),
        memory=(),
    )


class TestPlan:
    def test_model_assignment_respected(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed('{"assignments": {"AAPL": ["TECHNICAL", "MEDIA"]}, "rationale": "focus"}'))
        result, outcome = plan(planning_context(), spec, gw)
        assert result.assignments == {"AAPL": ("TECHNICAL", "MEDIA")}
        assert outcome.fallback is None

    def test_malformed_plan_falls_back_to_full_coverage(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed("I would rather not say."))
        result, outcome = plan(planning_context(), spec, gw)
        assert result.assignments == {"AAPL": ANALYST_KINDS, "MSFT": ANALYST_KINDS}
        assert outcome.fallback and "FallbackPlan" in outcome.fallback

    def test_out_of_pool_tickers_dropped(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed('{"assignments": {"TSLA": ["MEDIA"], "AAPL": ["INSIDER"]}, "rationale": ""}'))
        result, outcome = plan(planning_context(), spec, gw)
        assert result.assignments == {"AAPL": ("INSIDER",)}
        assert any("TSLA" in note for note in outcome.repairs)


class TestRunAnalyst:
    def test_media_with_empty_news_prompts_no_news(self, tmp_path):
        seen = {}

        def responder(request, spec):
            seen["user"] = request.user
            return '{"stance": "NEUTRAL", "confidence": 0.5, "rationale": "quiet", "key_evidence": []}'

        gw, spec = scripted_gateway(tmp_path, responder)
        signal, outcome = run_analyst("MEDIA", "AAPL", DAY, ContextSlice(kind="MEDIA"), spec, gw)
        assert "no news available" in seen["user"]
        assert signal.stance == "NEUTRAL" and signal.ticker == "AAPL" and signal.kind == "MEDIA"

    def test_scripted_mock_is_deterministic(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed('{"stance": "BULLISH", "confidence": 0.9, "rationale": "up", "key_evidence": ["e"]}'))
        first, _ = run_analyst("TECHNICAL", "AAPL", DAY, ContextSlice(kind="TECHNICAL"), spec, gw)
        second, _ = run_analyst("TECHNICAL", "AAPL", DAY, ContextSlice(kind="TECHNICAL"), spec, gw)
        assert first == second

    def test_overrange_confidence_clamped_and_flagged(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed('{"stance": "BULLISH", "confidence": 1.7, "rationale": "!"}'))
        signal, outcome = run_analyst("INSIDER", "AAPL", DAY, ContextSlice(kind="INSIDER"), spec, gw)
        assert signal.confidence == 1.0
        assert any("clamped" in note for note in outcome.repairs)

    def test_parse_failure_becomes_neutral_zero(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed("nope"))
        signal, outcome = run_analyst("FUNDAMENTAL", "AAPL", DAY, ContextSlice(kind="FUNDAMENTAL"), spec, gw)
        assert (signal.stance, signal.confidence, signal.rationale) == ("NEUTRAL", 0.0, "parse-failure")
        assert outcome.fallback


class TestManage:
    def signals(self):
        return [AnalystSignal(kind=k, ticker="AAPL", stance="BULLISH", confidence=0.5) for k in ANALYST_KINDS]

    def test_hold_keeps_quantity_none(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed('{"action": "HOLD", "quantity": null, "confidence": 0.9, "rationale": "wait"}'))
        decision, outcome = manage(self.signals(), manager_context(), spec, gw)
        assert decision.action == "HOLD" and decision.quantity is None

    def test_fallback_sizing_buy(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed('{"action": "BUY", "quantity": null, "confidence": 0.5, "rationale": "go"}'))
        decision, outcome = manage(self.signals(), manager_context(), spec, gw)
        # oracle: floor(confidence * weight_cap * nav / close)
        expected = int(0.5 * 0.2 * 10000 / 100)
        assert decision.quantity == expected == 10
        assert any("fallback" in note for note in outcome.repairs)

    def test_fallback_sizing_sell_scales_held(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed('{"action": "SELL", "quantity": null, "confidence": 0.6, "rationale": "trim"}'))
        context = manager_context(position=Position("AAPL", 30, q6(90)))
        decision, _ = manage(self.signals(), context, spec, gw)
        assert decision.quantity == int(0.6 * 30)

    def test_double_garbage_holds_with_zero_confidence(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed("utter nonsense } {"))
        decision, outcome = manage(self.signals(), manager_context(), spec, gw)
        assert (decision.action, decision.confidence) == ("HOLD", 0.0)
        assert outcome.fallback

    def test_signals_for_wrong_ticker_rejected(self, tmp_path):
        gw, spec = scripted_gateway(tmp_path, fixed("{}"))
        wrong = [AnalystSignal(kind="MEDIA", ticker="MSFT", stance="NEUTRAL", confidence=0.1)]
        with pytest.raises(Exception):
            manage(wrong, manager_context(), spec, gw)


class TestRenderReport:
    def test_four_signals_one_decision(self):
        plan_result = PlannerPlan(assignments={"AAPL": ANALYST_KINDS}, rationale="all")
        signals = {"AAPL": [AnalystSignal(kind=k, ticker="AAPL", stance="NEUTRAL", confidence=0.5) for k in ANALYST_KINDS]}
        decision = ManagerDecision("AAPL", "HOLD", None, 0.5, "steady")
        report = render_report(DAY, plan_result, signals, {"AAPL": decision}, {})
        assert len(report.tickers) == 1
        assert len(report.tickers[0].signals) == 4
        assert not report.no_action_day

    def test_skip_reason_present(self):
        plan_result = PlannerPlan(assignments={"AAPL": ("TECHNICAL",)}, rationale="")
        signals = {"AAPL": [AnalystSignal(kind="TECHNICAL", ticker="AAPL", stance="BULLISH", confidence=0.9)]}
        decision = ManagerDecision("AAPL", "BUY", 10, 0.9, "go")
        skip = SkippedDecision("AAPL", "BUY", 10, "insufficient-cash")
        report = render_report(DAY, plan_result, signals, {"AAPL": decision}, {}, {"AAPL": skip})
        assert report.tickers[0].skip.reason == "insufficient-cash"

    def test_empty_plan_marks_no_action_day(self):
        report = render_report(DAY, PlannerPlan(assignments={}, rationale="nothing"), {}, {}, {})
        assert report.no_action_day


class TestTemplatesAndSlices:
    def test_all_templates_load_with_separator(self):
        for role in ("planner", "technical", "fundamental", "insider", "media", "manager"):
            template = load_template(role)
            assert template.template_id == f"{role}.v1"
            assert template.system

    def test_context_slices_are_disjoint_and_gated(self, mini_store, as_of_jun10):
        facts_by_kind = {}
        for kind in ANALYST_KINDS:
            sl = build_context_slice(kind, mini_store, "AAPL", as_of_jun10)
            assert audit_leakage(as_of_jun10, sl.facts()) == []
            facts_by_kind[kind] = sl
        assert facts_by_kind["TECHNICAL"].news == ()
        assert facts_by_kind["MEDIA"].bars == ()
        assert facts_by_kind["INSIDER"].fundamentals is None

    def test_technical_slice_carries_indicators(self, mini_store, as_of_jun10):
        sl = build_context_slice("TECHNICAL", mini_store, "AAPL", as_of_jun10)
        assert sl.indicators is not None
        assert sl.indicators.return_5d is not None
