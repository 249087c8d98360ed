"""The structured inter-agent protocol: three JSON schemas and a strict parser.

Everything that crosses an agent boundary is one of PLAN, SIGNAL, or DECISION.
Parsing is strict-first with exactly one repair pass (pull the first balanced
JSON object out of surrounding prose, clamp numeric ranges, uppercase enums);
anything still invalid becomes a ``ParseFailure`` value, never an exception,
so the pipeline can fall back deterministically.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

ANALYST_KINDS = ("TECHNICAL", "FUNDAMENTAL", "INSIDER", "MEDIA")
STANCES = ("BULLISH", "BEARISH", "NEUTRAL")
ACTIONS = ("BUY", "SELL", "HOLD")

PLAN, SIGNAL, DECISION = "PLAN", "SIGNAL", "DECISION"
SCHEMA_IDS = (PLAN, SIGNAL, DECISION)


@dataclass(frozen=True)
class PlannerPlan:
    assignments: dict[str, tuple[str, ...]]
    rationale: str = ""

    def to_dict(self) -> dict:
        return {
            "assignments": {t: list(kinds) for t, kinds in sorted(self.assignments.items())},
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class AnalystSignal:
    kind: str
    ticker: str
    stance: str
    confidence: float
    rationale: str = ""
    key_evidence: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "ticker": self.ticker,
            "stance": self.stance,
            "confidence": self.confidence,
            "rationale": self.rationale,
            "key_evidence": list(self.key_evidence),
        }


@dataclass(frozen=True)
class ManagerDecision:
    ticker: str
    action: str
    quantity: int | None
    confidence: float
    rationale: str = ""

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "action": self.action,
            "quantity": self.quantity,
            "confidence": self.confidence,
            "rationale": self.rationale,
        }


@dataclass
class ParseResult:
    """Outcome of one parse attempt: a payload, or a reasoned failure."""

    ok: bool
    payload: dict | None = None
    repairs: list[str] = field(default_factory=list)
    failure: str | None = None

    @classmethod
    def failed(cls, reason: str) -> "ParseResult":
        return cls(ok=False, failure=reason)


def _first_json_object(text: str) -> str | None:
    """Extract the first balanced top-level JSON object from prose."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = text[start : i + 1]
                    try:
                        json.loads(candidate)
                        return candidate
                    except json.JSONDecodeError:
                        break
        start = text.find("{", start + 1)
    return None


def _clamp_confidence(value, repairs: list[str]) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    value = float(value)
    if math.isnan(value):
        return None
    if value < 0.0:
        repairs.append(f"confidence {value} clamped to 0.0")
        return 0.0
    if value > 1.0:
        repairs.append(f"confidence {value} clamped to 1.0")
        return 1.0
    return value


def _normalize_enum(value, vocabulary: tuple[str, ...], repairs: list[str]) -> str | None:
    if not isinstance(value, str):
        return None
    upper = value.strip().upper()
    if upper != value:
        repairs.append(f"enum {value!r} normalized to {upper!r}")
    return upper if upper in vocabulary else None


def _validate_plan(data: dict, repairs: list[str]) -> dict | None:
    assignments = data.get("assignments")
    if not isinstance(assignments, dict):
        return None
    cleaned: dict[str, list[str]] = {}
    for ticker, kinds in assignments.items():
        if not isinstance(ticker, str):
            return None
        if isinstance(kinds, str):
            kinds = [kinds]
            repairs.append(f"{ticker}: analyst list coerced from string")
        if not isinstance(kinds, list):
            return None
        kept = []
        for kind in kinds:
            normalized = _normalize_enum(kind, ANALYST_KINDS, repairs)
            if normalized is None:
                repairs.append(f"{ticker}: unknown analyst kind {kind!r} dropped")
                continue
            if normalized not in kept:
                kept.append(normalized)
        if kept:
            cleaned[ticker.strip().upper()] = kept
    rationale = data.get("rationale", "")
    return {"assignments": cleaned, "rationale": rationale if isinstance(rationale, str) else ""}


def _validate_signal(data: dict, repairs: list[str]) -> dict | None:
    stance = _normalize_enum(data.get("stance"), STANCES, repairs)
    if stance is None:
        return None
    confidence = _clamp_confidence(data.get("confidence"), repairs)
    if confidence is None:
        return None
    evidence = data.get("key_evidence", [])
    if isinstance(evidence, str):
        evidence = [evidence]
        repairs.append("key_evidence coerced from string")
    if not isinstance(evidence, list):
        evidence = []
        repairs.append("key_evidence dropped (not a list)")
    rationale = data.get("rationale", "")
    return {
        "stance": stance,
        "confidence": confidence,
        "rationale": rationale if isinstance(rationale, str) else "",
        "key_evidence": [str(item) for item in evidence],
    }


def _validate_decision(data: dict, repairs: list[str]) -> dict | None:
    action = _normalize_enum(data.get("action"), ACTIONS, repairs)
    if action is None:
        return None
    confidence = _clamp_confidence(data.get("confidence"), repairs)
    if confidence is None:
        return None
    quantity = data.get("quantity")
    if quantity is not None:
        if isinstance(quantity, bool):
            return None
        if isinstance(quantity, float):
            if math.isnan(quantity) or math.isinf(quantity):
                return None
            repairs.append(f"quantity {quantity} floored to integer")
            quantity = math.floor(quantity)
        if not isinstance(quantity, int):
            return None
        if quantity < 0:
            repairs.append(f"quantity {quantity} clamped to 0")
            quantity = 0
    rationale = data.get("rationale", "")
    return {
        "quantity": quantity,
        "action": action,
        "confidence": confidence,
        "rationale": rationale if isinstance(rationale, str) else "",
    }


_VALIDATORS = {PLAN: _validate_plan, SIGNAL: _validate_signal, DECISION: _validate_decision}


def parse_structured(raw: str, schema_id: str) -> ParseResult:
    """Parse one agent response against PLAN/SIGNAL/DECISION.

    Strict ``json.loads`` first; on failure, one repair pass extracts the
    first balanced JSON object from the text. Field-level repairs (clamps,
    case normalization) are recorded so callers can log them.
    """
    if schema_id not in SCHEMA_IDS:
        raise ValueError(f"unknown schema id {schema_id!r}")
    if not isinstance(raw, str) or not raw.strip():
        return ParseResult.failed("empty response")

    repairs: list[str] = []
    data = None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        extracted = _first_json_object(raw)
        if extracted is None:
            return ParseResult.failed("no JSON object")
        repairs.append("JSON object extracted from surrounding prose")
        data = json.loads(extracted)

    if not isinstance(data, dict):
        return ParseResult.failed(f"expected a JSON object, got {type(data).__name__}")

    payload = _VALIDATORS[schema_id](data, repairs)
    if payload is None:
        return ParseResult.failed(f"does not satisfy {schema_id} schema")
    if repairs:
        logger.warning("repaired %s payload: %s", schema_id, "; ".join(repairs))
    return ParseResult(ok=True, payload=payload, repairs=repairs)
