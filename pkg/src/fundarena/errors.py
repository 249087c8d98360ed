"""Error vocabulary shared by every module and surfaced verbatim by the API/CLI.

Each exception carries a stable ``code`` used on the wire (HTTP body and CLI
stderr), so operators and the console never see a bare 500.
"""

from __future__ import annotations


class ArenaError(Exception):
    """Base class; subclasses pin a wire code and a default HTTP status."""

    code = "ARENA_ERROR"
    http_status = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


# --- market data ---

class UnknownTicker(ArenaError):
    code = "UNKNOWN_TICKER"
    http_status = 404


class ProviderUnavailable(ArenaError):
    """Upstream data feed failure in live mode; retryable."""

    code = "PROVIDER_UNAVAILABLE"
    http_status = 503


class ValidationFailed(ArenaError):
    code = "VALIDATION_FAILED"
    http_status = 400

    def __init__(self, message: str = "", index: int | None = None):
        super().__init__(message)
        self.index = index


# --- portfolio ---

class InvalidPrice(ArenaError):
    code = "INVALID_PRICE"
    http_status = 400


class TickerOutsidePool(ArenaError):
    code = "TICKER_OUTSIDE_POOL"
    http_status = 400


class MissingPrice(ArenaError):
    code = "MISSING_PRICE"
    http_status = 422


class OutOfOrderCycle(ArenaError):
    code = "OUT_OF_ORDER"
    http_status = 409


# --- llm gateway ---

class LlmUnavailable(ArenaError):
    code = "LLM_UNAVAILABLE"
    http_status = 503


class CassetteMiss(ArenaError):
    """Replay-mode request whose hash is absent from the cassette.

    Must abort the cycle loudly; never falls through to a network call.
    """

    code = "CASSETTE_MISS"
    http_status = 409


class DuplicateProvider(ArenaError):
    code = "DUPLICATE_PROVIDER"
    http_status = 409


class CorruptCassette(ArenaError):
    code = "CORRUPT_CASSETTE"
    http_status = 422

    def __init__(self, message: str = "", line: int | None = None):
        super().__init__(message)
        self.line = line


# --- orchestrator ---

class NotTradingDay(ArenaError):
    code = "NOT_TRADING_DAY"
    http_status = 400


class DatasetGap(ArenaError):
    code = "DATASET_GAP"
    http_status = 422


class CutoffViolation(ArenaError):
    """Replay range overlaps the model's knowledge cutoff (contamination)."""

    code = "CUTOFF_VIOLATION"
    http_status = 409


class IllegalTransition(ArenaError):
    code = "ILLEGAL_TRANSITION"
    http_status = 409


class FundBusy(ArenaError):
    """Fund is locked by another in-flight cycle or run."""

    code = "FUND_BUSY"
    http_status = 409


class CycleFailed(ArenaError):
    """A trading cycle aborted; fund state is unchanged."""

    code = "CYCLE_FAILED"
    http_status = 500

    def __init__(self, message: str = "", cause: ArenaError | None = None):
        super().__init__(message)
        self.cause = cause


class LeakageDetected(ArenaError):
    """A fact newer than the cycle's as-of reached the prompt-build inputs."""

    code = "LEAKAGE_DETECTED"
    http_status = 500


# --- event store ---

class SeqConflict(ArenaError):
    code = "SEQ_CONFLICT"
    http_status = 409


class StorageFailure(ArenaError):
    code = "STORAGE_FAILURE"
    http_status = 500


class CorruptLog(ArenaError):
    code = "CORRUPT_LOG"
    http_status = 500

    def __init__(self, message: str = "", seq: int | None = None):
        super().__init__(message)
        self.seq = seq


class UnknownFund(ArenaError):
    code = "UNKNOWN_FUND"
    http_status = 404


class DuplicateFund(ArenaError):
    code = "DUPLICATE_FUND"
    http_status = 409


class UnknownRun(ArenaError):
    code = "UNKNOWN_RUN"
    http_status = 404


# --- metrics ---

class UnknownMetric(ArenaError):
    code = "UNKNOWN_METRIC"
    http_status = 400


class DegenerateSeries(ArenaError):
    code = "DEGENERATE_SERIES"
    http_status = 422


# --- api/cli ---

class BadConfig(ArenaError):
    code = "BAD_CONFIG"
    http_status = 400


class PortInUse(ArenaError):
    code = "PORT_IN_USE"
    http_status = 500
