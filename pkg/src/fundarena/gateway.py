"""Provider-agnostic chat-completion gateway with record/replay cassettes.

One contract over many HTTP providers: bounded concurrency, up to three
attempts with exponential backoff on retryable failures, and every exchange
recorded to a JSONL cassette keyed by a canonical request hash. In replay
mode the cassette is the only source; a miss aborts loudly instead of
silently calling out.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Mapping

from .clock import parse_date
from .errors import BadConfig, CassetteMiss, CorruptCassette, DuplicateProvider, LlmUnavailable

logger = logging.getLogger(__name__)

RECORD, REPLAY = "record", "replay"
RETRYABLE_STATUSES = {429, 500, 502, 503, 504}
BACKOFF_SCHEDULE_S = (1.0, 2.0, 4.0)
MAX_ATTEMPTS = 3

OPENAI_CHAT = "openai_chat"
PROMPT_RESPONSE = "prompt_response"
SCRIPTED = "scripted"
WIRE_DIALECTS = (OPENAI_CHAT, PROMPT_RESPONSE, SCRIPTED)


@dataclass(frozen=True)
class ModelSpec:
    spec_id: str
    provider: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout_s: int = 60
    knowledge_cutoff: date | None = None

    def validate(self) -> None:
        if not self.spec_id:
            raise BadConfig("model spec needs a spec_id")
        if self.temperature < 0:
            raise BadConfig("temperature must be >= 0")
        if self.max_tokens <= 0 or self.timeout_s <= 0:
            raise BadConfig("max_tokens and timeout_s must be positive")

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "provider": self.provider,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "timeout_s": self.timeout_s,
            "knowledge_cutoff": self.knowledge_cutoff.isoformat() if self.knowledge_cutoff else None,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ModelSpec":
        cutoff = raw.get("knowledge_cutoff")
        spec = cls(
            spec_id=raw["spec_id"],
            provider=raw["provider"],
            model_name=raw["model_name"],
            temperature=float(raw.get("temperature", 0.0)),
            max_tokens=int(raw.get("max_tokens", 1024)),
            timeout_s=int(raw.get("timeout_s", 60)),
            knowledge_cutoff=parse_date(cutoff) if cutoff else None,
        )
        spec.validate()
        return spec


@dataclass(frozen=True)
class ChatRequest:
    system: str
    user: str
    spec_id: str
    tags: tuple[tuple[str, str], ...] = ()

    @classmethod
    def build(cls, system: str, user: str, spec_id: str, tags: Mapping[str, str] | None = None) -> "ChatRequest":
        return cls(system, user, spec_id, tuple(sorted((tags or {}).items())))

    def to_dict(self) -> dict:
        return {"system": self.system, "user": self.user, "spec_id": self.spec_id, "tags": dict(self.tags)}

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @property
    def request_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    latency_ms: int = 0
    token_counts: dict = field(default_factory=dict)
    attempts: int = 1

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "finish_reason": self.finish_reason,
            "latency_ms": self.latency_ms,
            "token_counts": dict(self.token_counts),
            "attempts": self.attempts,
        }


@dataclass(frozen=True)
class ChatExchange:
    request: ChatRequest
    response: ChatResponse
    request_hash: str

    def to_dict(self) -> dict:
        return {
            "request": self.request.to_dict(),
            "response": self.response.to_dict(),
            "request_hash": self.request_hash,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ChatExchange":
        req = raw["request"]
        resp = raw["response"]
        request = ChatRequest.build(req["system"], req["user"], req["spec_id"], req.get("tags"))
        response = ChatResponse(
            text=resp["text"],
            finish_reason=resp.get("finish_reason", "stop"),
            latency_ms=int(resp.get("latency_ms", 0)),
            token_counts=dict(resp.get("token_counts", {})),
            attempts=int(resp.get("attempts", 1)),
        )
        return cls(request=request, response=response, request_hash=raw["request_hash"])


Responder = Callable[[ChatRequest, ModelSpec], str]
Transport = Callable[[str, dict, dict, int], tuple[int, object]]


@dataclass(frozen=True)
class ProviderProfile:
    name: str
    wire_dialect: str
    base_url: str = ""
    auth_env_var: str | None = None
    responder: Responder | None = None
    transport: Transport | None = None

    def validate(self) -> None:
        if self.wire_dialect not in WIRE_DIALECTS:
            raise BadConfig(f"wire_dialect must be one of {WIRE_DIALECTS}")
        if self.wire_dialect == SCRIPTED and self.responder is None:
            raise BadConfig(f"scripted provider {self.name} needs a responder")
        if self.wire_dialect != SCRIPTED and not self.base_url:
            raise BadConfig(f"provider {self.name} needs a base_url")

    def env_key_name(self) -> str | None:
        if self.wire_dialect == SCRIPTED:
            return None
        if self.auth_env_var is not None:
            return self.auth_env_var or None
        return f"ARENA_LLM_KEY_{self.name.upper().replace('-', '_')}"


def _default_transport(url: str, payload: dict, headers: dict, timeout_s: int) -> tuple[int, object]:
    import requests

    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout_s)
    except requests.RequestException as exc:
        raise ConnectionError(str(exc)) from exc
    try:
        body = resp.json()
    except ValueError:
        body = resp.text
    return resp.status_code, body


def _build_payload(dialect: str, spec: ModelSpec, request: ChatRequest) -> dict:
    if dialect == OPENAI_CHAT:
        return {
            "model": spec.model_name,
            "temperature": spec.temperature,
            "max_tokens": spec.max_tokens,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        }
    return {
        "model": spec.model_name,
        "temperature": spec.temperature,
        "max_tokens": spec.max_tokens,
        "prompt": request.system + "\n\n" + request.user,
    }


def _parse_body(dialect: str, body: object) -> tuple[str, str, dict]:
    try:
        if dialect == OPENAI_CHAT:
            choice = body["choices"][0]
            usage = body.get("usage", {}) or {}
            counts = {
                k: usage[src]
                for k, src in (("prompt", "prompt_tokens"), ("completion", "completion_tokens"))
                if src in usage
            }
            return choice["message"]["content"], choice.get("finish_reason", "stop"), counts
        return body["response"], body.get("finish_reason", "stop"), dict(body.get("token_counts", {}))
    except (KeyError, IndexError, TypeError) as exc:
        raise LlmUnavailable(f"malformed provider response: {exc}") from exc


class Cassette:
    """JSONL file of exchanges, deduplicated by request hash."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._by_hash: dict[str, ChatExchange] = {}

    def __len__(self) -> int:
        return len(self._by_hash)

    def lookup(self, request_hash: str) -> ChatExchange | None:
        return self._by_hash.get(request_hash)

    def record(self, exchange: ChatExchange) -> None:
        with self._lock:
            if exchange.request_hash in self._by_hash:
                return
            self._by_hash[exchange.request_hash] = exchange
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(exchange.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n")
                fh.flush()

    def load(self, path: str | Path | None = None) -> int:
        """Merge a cassette file; idempotent by request hash.

        Returns the number of distinct entries in the file.
        """
        source = Path(path) if path is not None else self.path
        if not source.exists():
            raise CorruptCassette(f"cassette file not found: {source}")
        seen: set[str] = set()
        with self._lock:
            for line_no, line in enumerate(source.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    exchange = ChatExchange.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CorruptCassette(f"{source.name}:{line_no}: {exc}", line=line_no) from exc
                seen.add(exchange.request_hash)
                self._by_hash.setdefault(exchange.request_hash, exchange)
        return len(seen)


class LlmGateway:
    """Thread-safe completion facade over registered providers and models."""

    def __init__(
        self,
        mode: str = RECORD,
        cassette_dir: str | Path = "cassettes",
        run_id: str = "session",
        max_concurrency: int = 4,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if mode not in (RECORD, REPLAY):
            raise BadConfig(f"gateway mode must be {RECORD!r} or {REPLAY!r}")
        self.mode = mode
        self.cassette_dir = Path(cassette_dir)
        self.cassette = Cassette(self.cassette_dir / f"{run_id}.jsonl")
        self._run_cassettes: dict[str, Cassette] = {}
        self._providers: dict[str, ProviderProfile] = {}
        self._models: dict[str, ModelSpec] = {}
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self._sleep = sleeper

    # -- registration --

    def register_provider(self, profile: ProviderProfile) -> None:
        profile.validate()
        if profile.name in self._providers:
            raise DuplicateProvider(f"provider {profile.name} already registered")
        self._providers[profile.name] = profile

    def register_model(self, spec: ModelSpec) -> None:
        spec.validate()
        self._models[spec.spec_id] = spec

    def model(self, spec_id: str) -> ModelSpec:
        if spec_id not in self._models:
            raise BadConfig(f"model spec {spec_id} not registered")
        return self._models[spec_id]

    # -- cassette management --

    def use_cassette(self, run_id: str) -> Cassette:
        """Open a per-run cassette; exchanges record there until released."""
        cassette = Cassette(self.cassette_dir / f"{run_id}.jsonl")
        self._run_cassettes[run_id] = cassette
        return cassette

    def release_cassette(self, run_id: str) -> None:
        self._run_cassettes.pop(run_id, None)

    def cassette_import(self, path: str | Path) -> int:
        return self.cassette.load(path)

    def cassette_export(self, dest: str | Path | None = None) -> Path:
        if dest is None:
            return self.cassette.path
        dest = Path(dest)
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(self.cassette.path.read_bytes())
        return dest

    # -- completion --

    def complete(self, request: ChatRequest) -> ChatExchange:
        spec = self.model(request.spec_id)
        request_hash = request.request_hash

        if self.mode == REPLAY:
            hit = self.cassette.lookup(request_hash)
            if hit is None:
                raise CassetteMiss(
                    f"no recorded response for hash {request_hash[:16]}… (spec {spec.spec_id})"
                )
            return hit

        profile = self._providers.get(spec.provider)
        if profile is None:
            raise BadConfig(f"provider {spec.provider} not registered")

        with self._slots:
            if profile.wire_dialect == SCRIPTED:
                text = profile.responder(request, spec)
                response = ChatResponse(text=text, finish_reason="stop", latency_ms=0, token_counts={}, attempts=1)
            else:
                response = self._complete_http(profile, spec, request)

        exchange = ChatExchange(request=request, response=response, request_hash=request_hash)
        self.cassette.record(exchange)
        for run_cassette in list(self._run_cassettes.values()):
            run_cassette.record(exchange)
        return exchange

    def _complete_http(self, profile: ProviderProfile, spec: ModelSpec, request: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        env_key = profile.env_key_name()
        if env_key:
            token = os.environ.get(env_key)
            if not token:
                raise LlmUnavailable(f"credentials: environment variable {env_key} not set")
            headers["Authorization"] = f"Bearer {token}"

        payload = _build_payload(profile.wire_dialect, spec, request)
        transport = profile.transport or _default_transport
        last_error = "exhausted"
        started = time.monotonic()
        for attempt in range(1, MAX_ATTEMPTS + 1):
            try:
                status, body = transport(profile.base_url, payload, headers, spec.timeout_s)
            except (ConnectionError, TimeoutError) as exc:
                last_error = f"transport: {exc}"
                status = None
            else:
                if status == 200:
                    text, finish_reason, counts = _parse_body(profile.wire_dialect, body)
                    latency_ms = int((time.monotonic() - started) * 1000)
                    if attempt > 1:
                        logger.info("%s succeeded on attempt %d", spec.spec_id, attempt)
                    return ChatResponse(text, finish_reason, latency_ms, counts, attempts=attempt)
                last_error = f"HTTP {status}"
                if status not in RETRYABLE_STATUSES:
                    raise LlmUnavailable(f"{spec.spec_id}: non-retryable {last_error}")
            if attempt < MAX_ATTEMPTS:
                delay = BACKOFF_SCHEDULE_S[attempt - 1]
                logger.warning("%s attempt %d failed (%s); retrying in %.0fs", spec.spec_id, attempt, last_error, delay)
                self._sleep(delay)
        raise LlmUnavailable(f"{spec.spec_id}: retries exhausted ({last_error})")
