"""fundarena: a live-arena platform that evaluates LLM backends as
autonomous fund managers on time-gated market data."""

__version__ = "0.1.0"

from .clock import AsOf
from .errors import ArenaError
from .gateway import ChatRequest, LlmGateway, ModelSpec, ProviderProfile
from .indicators import IndicatorSet, compute_indicators
from .market_data import (
    FundamentalSnapshot,
    InsiderTransaction,
    MarketDataStore,
    NewsItem,
    PriceBar,
    audit_leakage,
)
from .metrics import MetricsReport, compute_metrics, leaderboard
from .orchestrator import ArenaOrchestrator, ArenaRun, CycleRecord, LiveScheduler
from .portfolio import (
    Fund,
    FundConfig,
    NavSnapshot,
    Position,
    TradeFill,
    append_memory,
    execute_decision,
    mark_to_market,
)
from .protocol import AnalystSignal, ManagerDecision, PlannerPlan, parse_structured
from .service import ArenaService, init_data_dir

__all__ = [
    "AsOf",
    "ArenaError",
    "ArenaOrchestrator",
    "ArenaRun",
    "ArenaService",
    "AnalystSignal",
    "ChatRequest",
    "CycleRecord",
    "Fund",
    "FundConfig",
    "FundamentalSnapshot",
    "IndicatorSet",
    "InsiderTransaction",
    "LiveScheduler",
    "LlmGateway",
    "ManagerDecision",
    "MarketDataStore",
    "MetricsReport",
    "ModelSpec",
    "NavSnapshot",
    "NewsItem",
    "PlannerPlan",
    "Position",
    "PriceBar",
    "ProviderProfile",
    "TradeFill",
    "append_memory",
    "audit_leakage",
    "compute_indicators",
    "compute_metrics",
    "execute_decision",
    "init_data_dir",
    "leaderboard",
    "mark_to_market",
    "parse_structured",
]
