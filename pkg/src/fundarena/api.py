"""HTTP operator surface: funds, runs, decisions, leaderboard.

Handlers are stateless; everything durable lives in the event store, so the
service can be killed and restarted on the same data directory with no loss.
Every module error surfaces as a documented ``{code, message}`` body, never
a bare 500. Mutating cycle work is asynchronous: POST returns 202 with a
run id to poll.
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse

from . import __version__
from .clock import parse_date
from .errors import ArenaError, ValidationFailed
from .service import ArenaService

logger = logging.getLogger(__name__)


def _error_body(code: str, message: str) -> dict:
    return {"code": code, "message": message}


def _require(payload: dict, key: str, kind=None):
    if not isinstance(payload, dict) or key not in payload or payload[key] is None:
        raise ValidationFailed(f"missing required field {key!r}")
    value = payload[key]
    if kind is not None and not isinstance(value, kind):
        raise ValidationFailed(f"field {key!r} has wrong type")
    return value


def create_app(data_dir: str | Path | None = None, service: ArenaService | None = None) -> FastAPI:
    app = FastAPI(title="fundarena", version=__version__, docs_url=None, redoc_url=None)
    app.state.service = service or ArenaService(data_dir)

    @app.exception_handler(ArenaError)
    async def arena_error_handler(request: Request, exc: ArenaError):
        return JSONResponse(status_code=exc.http_status, content=_error_body(exc.code, exc.message))

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content=_error_body("VALIDATION_FAILED", str(exc)))

    @app.exception_handler(Exception)
    async def fallback_handler(request: Request, exc: Exception):
        logger.exception("unhandled error on %s", request.url.path)
        return JSONResponse(status_code=500, content=_error_body("INTERNAL", exc.__class__.__name__))

    def svc() -> ArenaService:
        return app.state.service

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__, "dataset": svc().config["dataset"], "llm_mode": svc().config["llm_mode"]}

    @app.post("/funds", status_code=201)
    async def create_fund(payload: dict):
        name = _require(payload, "name", str)
        model_spec = _require(payload, "model_spec")
        if not isinstance(model_spec, (str, dict)):
            raise ValidationFailed("model_spec must be a spec id or a spec object")
        stock_pool = _require(payload, "stock_pool", list)
        if not stock_pool:
            raise ValidationFailed("stock_pool must be non-empty")
        initial_cash = _require(payload, "initial_cash", (int, float, str))
        fund = svc().create_fund(
            name=name,
            model_spec=model_spec,
            stock_pool=stock_pool,
            initial_cash=initial_cash,
            config=payload.get("config"),
            inception=payload.get("inception"),
            fund_id=payload.get("fund_id"),
        )
        return {"fund_id": fund.fund_id}

    @app.get("/funds")
    async def list_funds():
        return {"funds": svc().list_funds()}

    @app.get("/funds/{fund_id}")
    async def get_fund(fund_id: str):
        return svc().fund_summary(fund_id)

    @app.post("/funds/{fund_id}/replay", status_code=202)
    async def start_replay(fund_id: str, payload: dict):
        from_date = parse_date(_require(payload, "from", str))
        to_date = parse_date(_require(payload, "to", str))
        run = svc().replay_async(
            fund_id, from_date, to_date, allow_contaminated=bool(payload.get("allow_contaminated", False))
        )
        return {"run_id": run.run_id, "status": run.status}

    @app.post("/funds/{fund_id}/cycles", status_code=202)
    async def start_cycle(fund_id: str, payload: dict):
        trading_date = parse_date(_require(payload, "date", str))
        run = svc().orchestrator.start_cycle_async(fund_id, trading_date)
        return {"run_id": run.run_id, "status": run.status}

    @app.get("/runs/{run_id}")
    async def get_run(run_id: str):
        return svc().get_run(run_id).to_dict()

    @app.post("/runs/{run_id}/control")
    async def control_run(run_id: str, payload: dict):
        command = _require(payload, "command", str)
        return svc().control_run(run_id, command.upper()).to_dict()

    @app.get("/funds/{fund_id}/nav")
    async def fund_nav(fund_id: str):
        svc()._require_fund(fund_id)
        return {"fund_id": fund_id, "series": svc().nav_series(fund_id)}

    @app.get("/funds/{fund_id}/metrics")
    async def fund_metrics(fund_id: str):
        report = svc().metrics(fund_id)
        return {"fund_id": fund_id, "metrics": report.to_dict()}

    @app.get("/funds/{fund_id}/events")
    async def fund_events(
        fund_id: str,
        types: str | None = None,
        ticker: str | None = None,
        limit: int = 100,
        offset: int = 0,
        date_from: str | None = Query(default=None, alias="from"),
        date_to: str | None = Query(default=None, alias="to"),
    ):
        return svc().query_events(
            fund_id,
            types=set(types.split(",")) if types else None,
            ticker=ticker,
            limit=max(1, min(limit, 1000)),
            offset=max(0, offset),
            date_from=parse_date(date_from) if date_from else None,
            date_to=parse_date(date_to) if date_to else None,
        )

    @app.get("/leaderboard")
    async def get_leaderboard(rank_key: str | None = None):
        return {"rank_key": rank_key or svc().config.get("rank_key", "sharpe"), "rows": svc().leaderboard(rank_key)}

    @app.get("/funds/{fund_id}/export")
    async def export_fund(fund_id: str):
        bundle = svc().export_bundle(fund_id)
        return FileResponse(bundle, media_type="application/zip", filename=bundle.name)

    return app
