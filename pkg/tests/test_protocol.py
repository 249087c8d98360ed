"""Strict-parse-with-one-repair contract and its total fallback behavior."""

from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fundarena.protocol import DECISION, PLAN, SIGNAL, parse_structured


class TestStrictAndRepair:
    def test_lowercase_stance_normalized(self):
        result = parse_structured('{"stance":"bullish","confidence":0.8,"rationale":"r","key_evidence":[]}', SIGNAL)
        assert result.ok and result.payload["stance"] == "BULLISH"
        assert any("normalized" in r for r in result.repairs)

    def test_prose_wrapped_json_repaired(self):
        raw = 'Sure! Here is my answer: {"action": "BUY", "quantity": 5, "confidence": 0.7, "rationale": "x"} Hope it helps.'
        result = parse_structured(raw, DECISION)
        assert result.ok and result.payload["action"] == "BUY"
        assert any("extracted" in r for r in result.repairs)

    def test_no_json_object_fails(self):
        result = parse_structured("I cannot decide.", DECISION)
        assert not result.ok
        assert "no JSON object" in result.failure

    def test_out_of_range_confidence_clamped_and_flagged(self, caplog):
        with caplog.at_level("WARNING"):
            result = parse_structured('{"stance":"NEUTRAL","confidence":1.7,"rationale":"r"}', SIGNAL)
        assert result.ok and result.payload["confidence"] == 1.0
        assert any("clamped" in r for r in result.repairs)
        assert "repaired" in caplog.text

    def test_negative_confidence_clamped(self):
        result = parse_structured('{"action":"HOLD","quantity":null,"confidence":-0.4,"rationale":""}', DECISION)
        assert result.ok and result.payload["confidence"] == 0.0

    def test_markdown_fenced_json(self):
        raw = '```json\n{"stance": "BEARISH", "confidence": 0.4, "rationale": "fence"}\n```'
        result = parse_structured(raw, SIGNAL)
        assert result.ok and result.payload["stance"] == "BEARISH"

    def test_wrong_enum_fails_to_schema(self):
        result = parse_structured('{"stance":"SIDEWAYS","confidence":0.5,"rationale":""}', SIGNAL)
        assert not result.ok and "SIGNAL" in result.failure

    def test_non_object_json_fails(self):
        assert not parse_structured("[1,2,3]", SIGNAL).ok
        assert not parse_structured('"just a string"', PLAN).ok

    def test_empty_input_fails(self):
        assert not parse_structured("", SIGNAL).ok
        assert not parse_structured("   \n", DECISION).ok


class TestPlanSchema:
    def test_valid_plan(self):
        raw = json.dumps({"assignments": {"AAPL": ["TECHNICAL", "MEDIA"]}, "rationale": "focus"})
        result = parse_structured(raw, PLAN)
        assert result.ok
        assert result.payload["assignments"] == {"AAPL": ["TECHNICAL", "MEDIA"]}

    def test_unknown_kind_dropped_with_note(self):
        raw = json.dumps({"assignments": {"AAPL": ["TECHNICAL", "ASTROLOGY"]}, "rationale": ""})
        result = parse_structured(raw, PLAN)
        assert result.ok
        assert result.payload["assignments"]["AAPL"] == ["TECHNICAL"]
        assert any("ASTROLOGY" in r for r in result.repairs)

    def test_kind_string_coerced_to_list(self):
        raw = json.dumps({"assignments": {"AAPL": "media"}, "rationale": ""})
        result = parse_structured(raw, PLAN)
        assert result.ok and result.payload["assignments"]["AAPL"] == ["MEDIA"]

    def test_ticker_with_empty_kinds_dropped(self):
        raw = json.dumps({"assignments": {"AAPL": [], "MSFT": ["INSIDER"]}, "rationale": ""})
        result = parse_structured(raw, PLAN)
        assert result.ok and list(result.payload["assignments"]) == ["MSFT"]

    def test_missing_assignments_fails(self):
        assert not parse_structured('{"rationale": "no work"}', PLAN).ok


class TestDecisionSchema:
    def test_float_quantity_floored(self):
        result = parse_structured('{"action":"BUY","quantity":3.9,"confidence":0.5,"rationale":""}', DECISION)
        assert result.ok and result.payload["quantity"] == 3

    def test_negative_quantity_clamped_to_zero(self):
        result = parse_structured('{"action":"SELL","quantity":-5,"confidence":0.5,"rationale":""}', DECISION)
        assert result.ok and result.payload["quantity"] == 0

    def test_null_quantity_passes_through(self):
        result = parse_structured('{"action":"BUY","quantity":null,"confidence":0.5,"rationale":""}', DECISION)
        assert result.ok and result.payload["quantity"] is None

    def test_boolean_quantity_fails(self):
        assert not parse_structured('{"action":"BUY","quantity":true,"confidence":0.5,"rationale":""}', DECISION).ok


class TestSignalSchema:
    def test_key_evidence_string_coerced(self):
        result = parse_structured('{"stance":"NEUTRAL","confidence":0.5,"rationale":"","key_evidence":"one fact"}', SIGNAL)
        assert result.ok and result.payload["key_evidence"] == ["one fact"]

    def test_missing_evidence_defaults_empty(self):
        result = parse_structured('{"stance":"NEUTRAL","confidence":0.5,"rationale":""}', SIGNAL)
        assert result.ok and result.payload["key_evidence"] == []

    def test_nan_confidence_fails(self):
        assert not parse_structured('{"stance":"NEUTRAL","confidence":NaN,"rationale":""}', SIGNAL).ok


def test_unknown_schema_id_is_a_programming_error():
    with pytest.raises(ValueError):
        parse_structured("{}", "NOPE")


_VALID_SAMPLES = [
    '{"assignments": {"AAPL": ["TECHNICAL"]}, "rationale": "r"}',
    '{"stance": "BULLISH", "confidence": 0.5, "rationale": "r", "key_evidence": []}',
    '{"action": "HOLD", "quantity": null, "confidence": 0.5, "rationale": "r"}',
]


@given(data=st.data(), schema=st.sampled_from([PLAN, SIGNAL, DECISION]))
@settings(max_examples=400, deadline=None)
def test_fuzz_never_crashes(data, schema):
    """Random text and mutated valid payloads parse or fail, never raise."""
    choice = data.draw(st.integers(min_value=0, max_value=2))
    if choice == 0:
        raw = data.draw(st.text(max_size=200))
    elif choice == 1:
        base = data.draw(st.sampled_from(_VALID_SAMPLES))
        cut = data.draw(st.integers(min_value=0, max_value=len(base)))
        raw = base[:cut] + data.draw(st.text(max_size=12)) + base[cut:]
    else:
        raw = json.dumps(
            data.draw(
                st.dictionaries(
                    st.text(max_size=10),
                    st.one_of(st.none(), st.booleans(), st.floats(allow_nan=False), st.text(max_size=20), st.lists(st.text(max_size=5), max_size=3)),
                    max_size=6,
                )
            )
        )
    result = parse_structured(raw, schema)
    assert result.ok in (True, False)
    if result.ok:
        assert isinstance(result.payload, dict)
    else:
        assert result.failure


def test_ten_thousand_mutations_no_crash():
    """Volume check beyond hypothesis: 10k seeded mutations, zero exceptions."""
    rng = random.Random(1234)
    alphabet = '{}[]":,nulltrue0123456789.eE+- abcXYZBUYSELLHOLD'
    count = 0
    for i in range(10_000):
        base = _VALID_SAMPLES[i % 3]
        raw = list(base)
        for _ in range(rng.randrange(0, 6)):
            op = rng.randrange(3)
            pos = rng.randrange(len(raw)) if raw else 0
            if op == 0 and raw:
                raw[pos] = rng.choice(alphabet)
            elif op == 1:
                raw.insert(pos, rng.choice(alphabet))
            elif op == 2 and raw:
                raw.pop(pos)
        result = parse_structured("".join(raw), (PLAN, SIGNAL, DECISION)[i % 3])
        count += 1
        assert result.ok in (True, False)
    assert count == 10_000
