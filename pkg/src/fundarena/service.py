"""Application service behind both the HTTP API and the CLI.

All state lives in the event store plus the run registry; a service instance
can be killed and rebuilt from the data directory at any time. CLI and API
calls go through the same methods, so their event-log effects are identical
by construction.
"""

from __future__ import annotations

import json
import os
import re
import zipfile
from datetime import date, time
from decimal import Decimal
from pathlib import Path

from .clock import DEFAULT_SAMPLE_TIME_UTC, AsOf, parse_date
from .errors import BadConfig, DuplicateFund, UnknownFund, ValidationFailed
from .events import ArenaEvent, EventStore
from .fixtures import generate_sample_dataset
from .gateway import LlmGateway, ModelSpec, ProviderProfile
from .market_data import MarketDataStore
from .metrics import MetricsReport, compute_metrics, leaderboard
from .mockmodel import mock_provider_profile
from .orchestrator import ArenaOrchestrator, ArenaRun, CycleRecord
from .portfolio import Fund, FundConfig, TradeFill
from .numerics import money_str, q6

ENV_DATA_DIR = "ARENA_DATA_DIR"
ENV_MODE = "ARENA_MODE"

DEFAULT_CONFIG = {
    "dataset": "sample",
    "llm_mode": "record",
    "rank_key": "sharpe",
}

DEFAULT_MODEL_SPECS = [
    {"spec_id": "mock-balanced", "provider": "mock", "model_name": "balanced"},
    {"spec_id": "mock-hold", "provider": "mock", "model_name": "hold"},
    {"spec_id": "mock-noisy", "provider": "mock", "model_name": "noisy"},
]


def slugify(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    if not slug:
        raise BadConfig(f"cannot derive a fund id from name {name!r}")
    return slug


def init_data_dir(data_dir: str | Path, force: bool = False) -> dict:
    """Scaffold a data directory: sample fixtures, config, model registry."""
    root = Path(data_dir)
    config_path = root / "config.json"
    if config_path.exists() and not force:
        raise BadConfig(f"{config_path} already exists (use force to overwrite)")
    (root / "funds").mkdir(parents=True, exist_ok=True)
    (root / "cassettes").mkdir(parents=True, exist_ok=True)
    dataset_dir = root / "datasets" / "sample"
    store = generate_sample_dataset(dataset_dir)
    config_path.write_text(json.dumps(DEFAULT_CONFIG, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (root / "models.json").write_text(json.dumps(DEFAULT_MODEL_SPECS, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (root / "providers.json").write_text("[]\n", encoding="utf-8")
    days = store.trading_days()
    return {
        "data_dir": str(root),
        "dataset": "sample",
        "tickers": sorted(store.known_tickers()),
        "trading_days": [d.isoformat() for d in days],
        "models": [m["spec_id"] for m in DEFAULT_MODEL_SPECS],
    }


class ArenaService:
    def __init__(
        self,
        data_dir: str | Path | None = None,
        llm_mode: str | None = None,
        dataset: str | None = None,
        cassette: str | Path | None = None,
    ):
        self.data_dir = Path(data_dir or os.environ.get(ENV_DATA_DIR, "data"))
        config_path = self.data_dir / "config.json"
        self.config = dict(DEFAULT_CONFIG)
        if config_path.exists():
            self.config.update(json.loads(config_path.read_text(encoding="utf-8")))

        env_mode = os.environ.get(ENV_MODE)
        if env_mode:
            # Operator-facing names: live records, replay reads the cassette.
            self.config["llm_mode"] = {"live": "record", "replay": "replay"}.get(env_mode, env_mode)
        if llm_mode:
            self.config["llm_mode"] = llm_mode
        if dataset:
            self.config["dataset"] = dataset

        dataset_dir = self.data_dir / "datasets" / self.config["dataset"]
        if not dataset_dir.exists():
            raise BadConfig(f"dataset directory {dataset_dir} not found (run init first)")
        self.market = MarketDataStore.load(dataset_dir)
        self.events = EventStore(self.data_dir)
        self.gateway = LlmGateway(
            mode=self.config["llm_mode"],
            cassette_dir=self.data_dir / "cassettes",
        )
        self.gateway.register_provider(mock_provider_profile())
        self._load_registries()
        if cassette:
            self.gateway.cassette_import(cassette)
        self.orchestrator = ArenaOrchestrator(
            self.market, self.events, self.gateway, sample_time=self._sample_time()
        )

    def _sample_time(self) -> time:
        raw = self.config.get("sample_time_utc")
        if not raw:
            return DEFAULT_SAMPLE_TIME_UTC
        try:
            hour, minute = (int(part) for part in str(raw).split(":")[:2])
            return time(hour, minute)
        except ValueError as exc:
            raise BadConfig(f"sample_time_utc must be HH:MM, got {raw!r}") from exc

    def _load_registries(self) -> None:
        providers_path = self.data_dir / "providers.json"
        if providers_path.exists():
            for raw in json.loads(providers_path.read_text(encoding="utf-8")):
                self.gateway.register_provider(
                    ProviderProfile(
                        name=raw["name"],
                        wire_dialect=raw["wire_dialect"],
                        base_url=raw.get("base_url", ""),
                        auth_env_var=raw.get("auth_env_var"),
                    )
                )
        models_path = self.data_dir / "models.json"
        if models_path.exists():
            for raw in json.loads(models_path.read_text(encoding="utf-8")):
                self.gateway.register_model(ModelSpec.from_dict(raw))

    def _persist_model_spec(self, spec: ModelSpec) -> None:
        """Inline-registered specs must survive a service restart."""
        models_path = self.data_dir / "models.json"
        entries = json.loads(models_path.read_text(encoding="utf-8")) if models_path.exists() else []
        entries = [e for e in entries if e.get("spec_id") != spec.spec_id]
        entries.append(spec.to_dict())
        models_path.write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    # -- funds --

    def create_fund(
        self,
        name: str,
        model_spec: str | dict,
        stock_pool: list[str],
        initial_cash,
        config: dict | None = None,
        inception: date | str | None = None,
        fund_id: str | None = None,
    ) -> Fund:
        if isinstance(model_spec, dict):
            spec = ModelSpec.from_dict(model_spec)
            self.gateway.register_model(spec)
            self._persist_model_spec(spec)
            spec_id = spec.spec_id
        else:
            spec_id = model_spec
            self.gateway.model(spec_id)  # must already be registered

        fund_id = fund_id or slugify(name)
        if self.events.fund_exists(fund_id):
            raise DuplicateFund(f"fund {fund_id} already exists")

        if inception is None:
            inception_date = self.market.dataset_start() or date.today()
        else:
            inception_date = parse_date(inception)
        inception_as_of = AsOf.at_sample_time(inception_date)

        try:
            cash = q6(initial_cash)
        except (ValueError, ArithmeticError) as exc:
            raise ValidationFailed(f"initial_cash: {exc}") from exc
        if cash <= 0:
            # cash > 0 keeps nav > 0 for the fund's whole life, which the
            # returns-based metrics rely on.
            raise ValidationFailed("initial_cash must be > 0")

        fund = Fund(
            fund_id=fund_id,
            name=name,
            model_spec_id=spec_id,
            stock_pool=frozenset(stock_pool),
            cash=cash,
            positions={},
            inception=inception_as_of,
            config=FundConfig.from_dict(config or {}),
        )
        fund.validate()
        self.events.append(
            fund_id,
            [ArenaEvent(seq=1, ts=inception_as_of.instant, type="FundCreated", payload={"fund": fund.to_dict()})],
        )
        return fund

    def list_funds(self) -> list[dict]:
        return [self.fund_summary(fund_id) for fund_id in self.events.list_funds()]

    def fund_summary(self, fund_id: str) -> dict:
        folded = self.events.fold_fund(fund_id)
        fund = folded.fund
        nav = folded.nav_series[-1][1] if folded.nav_series else fund.cash
        report = self.metrics(fund_id)
        return {
            "fund_id": fund.fund_id,
            "name": fund.name,
            "model_spec_id": fund.model_spec_id,
            "stock_pool": sorted(fund.stock_pool),
            "cash": money_str(fund.cash),
            "positions": {t: p.to_dict() for t, p in sorted(fund.positions.items())},
            "nav": money_str(nav),
            "cycles_completed": len(folded.completed_dates),
            "contaminated": folded.contaminated,
            "cumulative_return": report.cumulative_return,
            "config": fund.config.to_dict(),
        }

    def nav_series(self, fund_id: str) -> list[dict]:
        snaps = self.events.nav_snapshots(fund_id)
        return [
            {
                "trading_date": s.as_of.trading_date.isoformat(),
                "cash": money_str(s.cash),
                "holdings_value": money_str(s.holdings_value),
                "nav": money_str(s.nav),
            }
            for s in snaps
        ]

    def metrics(self, fund_id: str, rf_annual: float = 0.0) -> MetricsReport:
        if not self.events.fund_exists(fund_id):
            raise UnknownFund(f"fund {fund_id} not found")
        return self.orchestrator.fund_metrics(fund_id, rf_annual)

    def leaderboard(self, rank_key: str | None = None) -> list[dict]:
        key = rank_key or self.config.get("rank_key", "sharpe")
        reports = {fund_id: self.metrics(fund_id) for fund_id in self.events.list_funds()}
        return leaderboard(reports, key)

    # -- runs --

    def replay(
        self,
        fund_id: str,
        from_date: date | str,
        to_date: date | str,
        allow_contaminated: bool = False,
        run_id: str | None = None,
    ) -> tuple[ArenaRun, list[CycleRecord]]:
        self._require_fund(fund_id)
        return self.orchestrator.run_replay(
            fund_id,
            parse_date(from_date),
            parse_date(to_date),
            run_id=run_id,
            allow_contaminated=allow_contaminated,
        )

    def replay_async(self, fund_id: str, from_date: date | str, to_date: date | str, allow_contaminated: bool = False) -> ArenaRun:
        self._require_fund(fund_id)
        return self.orchestrator.start_replay_async(
            fund_id, parse_date(from_date), parse_date(to_date), allow_contaminated=allow_contaminated
        )

    def run_cycle(self, fund_id: str, trading_date: date | str) -> CycleRecord:
        self._require_fund(fund_id)
        return self.orchestrator.run_cycle(fund_id, parse_date(trading_date))

    def get_run(self, run_id: str) -> ArenaRun:
        return self.orchestrator.get_run(run_id)

    def control_run(self, run_id: str, command: str) -> ArenaRun:
        return self.orchestrator.control(run_id, command)

    def query_events(self, fund_id: str, **kwargs) -> dict:
        return self.events.query(fund_id, **kwargs)

    def _require_fund(self, fund_id: str) -> None:
        if not self.events.fund_exists(fund_id):
            raise UnknownFund(f"fund {fund_id} not found")

    # -- export --

    def export_bundle(self, fund_id: str, out_path: str | Path | None = None) -> Path:
        """Events plus every cassette referenced by the fund's runs, zipped."""
        self._require_fund(fund_id)
        out = Path(out_path or (self.data_dir / f"{fund_id}-bundle.zip"))
        run_ids = {
            event.payload["run_id"]
            for event in self.events.read(fund_id)
            if "run_id" in event.payload
        }
        with zipfile.ZipFile(out, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.write(self.events.path_for(fund_id), arcname=f"funds/{fund_id}/events.jsonl")
            for run_id in sorted(run_ids):
                cassette = self.data_dir / "cassettes" / f"{run_id}.jsonl"
                if cassette.exists():
                    zf.write(cassette, arcname=f"cassettes/{run_id}.jsonl")
            zf.writestr(
                f"funds/{fund_id}/summary.json",
                json.dumps(self.fund_summary(fund_id), indent=2, sort_keys=True),
            )
        return out
