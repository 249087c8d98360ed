"""Deterministic scripted model backends for offline runs and tests.

Each script answers the planner/analyst/manager prompts with protocol JSON
derived purely from the request tags (role, ticker, trading date), so a run
is reproducible byte-for-byte with zero network. ``ModelSpec.model_name``
selects the script.
"""

from __future__ import annotations

import hashlib
import json

from .errors import BadConfig
from .gateway import SCRIPTED, ChatRequest, ModelSpec, ProviderProfile
from .protocol import ANALYST_KINDS

MOCK_PROVIDER = "mock"


def _digest(*parts: str) -> bytes:
    return hashlib.sha256("|".join(parts).encode("utf-8")).digest()


def _stance_for(trading_date: str, ticker: str, kind: str) -> tuple[str, float]:
    dg = _digest(trading_date, ticker, kind)
    stance = ("BULLISH", "BULLISH", "BEARISH", "NEUTRAL")[dg[0] % 4]
    confidence = round(0.4 + (dg[1] % 41) / 100.0, 2)
    return stance, confidence


def _plan_payload(request: ChatRequest) -> dict:
    tags = dict(request.tags)
    tickers = [t for t in tags.get("tickers", "").split(",") if t]
    return {
        "assignments": {ticker: list(ANALYST_KINDS) for ticker in tickers},
        "rationale": "scripted: full coverage of the pool",
    }


def _signal_payload(request: ChatRequest) -> dict:
    tags = dict(request.tags)
    stance, confidence = _stance_for(tags.get("trading_date", ""), tags.get("ticker", ""), tags.get("role", "").upper())
    return {
        "stance": stance,
        "confidence": confidence,
        "rationale": f"scripted {tags.get('role', '?')} view",
        "key_evidence": [],
    }


def _decision_payload(request: ChatRequest) -> dict:
    tags = dict(request.tags)
    trading_date, ticker = tags.get("trading_date", ""), tags.get("ticker", "")
    stances = [_stance_for(trading_date, ticker, kind) for kind in ANALYST_KINDS]
    bulls = sum(1 for s, _ in stances if s == "BULLISH")
    bears = sum(1 for s, _ in stances if s == "BEARISH")
    action = "BUY" if bulls > bears else ("SELL" if bears > bulls else "HOLD")
    confidence = round(sum(c for _, c in stances) / len(stances), 2)
    return {
        "action": action,
        "quantity": None,
        "confidence": confidence,
        "rationale": f"scripted consensus {bulls}-{bears}",
    }


def _respond_balanced(request: ChatRequest, spec: ModelSpec) -> str:
    role = dict(request.tags).get("role", "")
    if role == "planner":
        return json.dumps(_plan_payload(request))
    if role == "manager":
        return json.dumps(_decision_payload(request))
    return json.dumps(_signal_payload(request))


def _respond_hold(request: ChatRequest, spec: ModelSpec) -> str:
    role = dict(request.tags).get("role", "")
    if role == "planner":
        return json.dumps(_plan_payload(request))
    if role == "manager":
        return json.dumps({"action": "HOLD", "quantity": None, "confidence": 1.0, "rationale": "scripted: hold everything"})
    return json.dumps({"stance": "NEUTRAL", "confidence": 0.5, "rationale": "scripted neutral", "key_evidence": []})


def _respond_noisy(request: ChatRequest, spec: ModelSpec) -> str:
    """Balanced content, deliberately messy envelope: exercises the repair path."""
    tags = dict(request.tags)
    text = _respond_balanced(request, spec)
    mode = _digest(tags.get("trading_date", ""), tags.get("ticker", ""), tags.get("role", ""))[3] % 3
    if mode == 0:
        return f"Sure! Here is my structured answer:\n{text}\nHope that helps."
    if mode == 1:
        payload = json.loads(text)
        for key in ("stance", "action"):
            if key in payload:
                payload[key] = payload[key].lower()
        return json.dumps(payload)
    payload = json.loads(text)
    if "confidence" in payload:
        payload["confidence"] = payload["confidence"] + 1.0
    return json.dumps(payload)


SCRIPTS = {
    "balanced": _respond_balanced,
    "hold": _respond_hold,
    "noisy": _respond_noisy,
}


def scripted_responder(request: ChatRequest, spec: ModelSpec) -> str:
    script = SCRIPTS.get(spec.model_name)
    if script is None:
        raise BadConfig(f"unknown mock script {spec.model_name!r}; have {sorted(SCRIPTS)}")
    return script(request, spec)


def mock_provider_profile(name: str = MOCK_PROVIDER) -> ProviderProfile:
    return ProviderProfile(name=name, wire_dialect=SCRIPTED, responder=scripted_responder)
