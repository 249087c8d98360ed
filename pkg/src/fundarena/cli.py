"""Headless operator CLI.

Every subcommand goes through the same service layer as the HTTP API, so the
event-log effects are identical. Exit code 0 on success; otherwise the error
code and message go to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ArenaError, BadConfig, PortInUse
from .service import ArenaService, init_data_dir


def _add_data_dir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data-dir", default=None, help="arena data directory (default: $ARENA_DATA_DIR or ./data)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fundarena", description="LLM fund-manager arena")
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="scaffold a data dir with sample fixtures")
    _add_data_dir(p_init)
    p_init.add_argument("--force", action="store_true", help="overwrite an existing config")

    p_fund = sub.add_parser("fund", help="fund management")
    fund_sub = p_fund.add_subparsers(dest="fund_command", required=True)
    p_create = fund_sub.add_parser("create", help="create a fund")
    _add_data_dir(p_create)
    p_create.add_argument("--name", required=True)
    p_create.add_argument("--model", required=True, help="registered model spec id (see models.json)")
    p_create.add_argument("--pool", required=True, help="comma-separated tickers")
    p_create.add_argument("--cash", required=True, help="initial cash")
    p_create.add_argument("--max-weight", default=None, help="max position weight, e.g. 0.2")
    p_create.add_argument("--fee-bps", type=int, default=None)
    p_create.add_argument("--policy", choices=("CLOSE", "NEXT_OPEN"), default=None)
    p_create.add_argument("--memory-window", type=int, default=None)
    p_create.add_argument("--inception", default=None, help="inception date (default: dataset start)")
    p_create.add_argument("--fund-id", default=None)

    p_replay = sub.add_parser("replay", help="replay a date range for a fund")
    _add_data_dir(p_replay)
    p_replay.add_argument("--fund", help="fund id")
    p_replay.add_argument("--from", dest="from_date", help="start date (YYYY-MM-DD)")
    p_replay.add_argument("--to", dest="to_date", help="end date (YYYY-MM-DD)")
    p_replay.add_argument("--run-id", default=None)
    p_replay.add_argument("--allow-contaminated", action="store_true", help="run despite a knowledge-cutoff overlap (stamps the run CONTAMINATED)")
    p_replay.add_argument("--llm-mode", choices=("record", "replay"), default=None)
    p_replay.add_argument("--cassette", default=None, help="cassette file to import before running")
    p_replay.add_argument("--config", default=None, help="run configuration JSON file")

    p_cycle = sub.add_parser("cycle", help="cycle operations")
    cycle_sub = p_cycle.add_subparsers(dest="cycle_command", required=True)
    p_cycle_run = cycle_sub.add_parser("run", help="run one trading cycle")
    _add_data_dir(p_cycle_run)
    p_cycle_run.add_argument("--fund", required=True)
    p_cycle_run.add_argument("--date", required=True)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    _add_data_dir(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    p_board = sub.add_parser("leaderboard", help="print the fund ranking")
    _add_data_dir(p_board)
    p_board.add_argument("--rank-key", default=None)

    p_export = sub.add_parser("export", help="export a fund's events and cassettes")
    _add_data_dir(p_export)
    p_export.add_argument("--fund", required=True)
    p_export.add_argument("--out", default=None)

    return parser


def _cmd_init(args) -> int:
    summary = init_data_dir(args.data_dir or "data", force=args.force)
    print(f"initialized {summary['data_dir']}")
    print(f"dataset: {summary['dataset']} tickers: {', '.join(summary['tickers'])}")
    print(f"trading days: {summary['trading_days'][0]} .. {summary['trading_days'][-1]} ({len(summary['trading_days'])})")
    print(f"models: {', '.join(summary['models'])}")
    return 0


def _fund_config_from_args(args) -> dict:
    config = {}
    if args.max_weight is not None:
        config["max_position_weight"] = args.max_weight
    if args.fee_bps is not None:
        config["fee_bps"] = args.fee_bps
    if args.policy is not None:
        config["execution_policy"] = args.policy
    if args.memory_window is not None:
        config["memory_window"] = args.memory_window
    return config


def _cmd_fund_create(args) -> int:
    service = ArenaService(args.data_dir)
    fund = service.create_fund(
        name=args.name,
        model_spec=args.model,
        stock_pool=[t.strip().upper() for t in args.pool.split(",") if t.strip()],
        initial_cash=args.cash,
        config=_fund_config_from_args(args),
        inception=args.inception,
        fund_id=args.fund_id,
    )
    print(f"created fund {fund.fund_id} (model {fund.model_spec_id}, pool {', '.join(sorted(fund.stock_pool))})")
    return 0


def _cmd_replay(args) -> int:
    fund_id, from_date, to_date = args.fund, args.from_date, args.to_date
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        service = ArenaService(args.data_dir, llm_mode=args.llm_mode, dataset=raw.get("dataset"), cassette=args.cassette)
        fund_id = fund_id or raw["fund"].get("fund_id") or raw["fund"]["name"]
        if not service.events.fund_exists(fund_id):
            fund = service.create_fund(
                name=raw["fund"]["name"],
                model_spec=raw["model_spec"],
                stock_pool=raw["fund"]["stock_pool"],
                initial_cash=raw["fund"]["initial_cash"],
                config={**raw.get("fund", {}).get("config", {}), **({"execution_policy": raw["execution_policy"]} if "execution_policy" in raw else {})},
                fund_id=raw["fund"].get("fund_id"),
            )
            fund_id = fund.fund_id
        from_date = from_date or raw["date_range"]["from"]
        to_date = to_date or raw["date_range"]["to"]
    else:
        if not (fund_id and from_date and to_date):
            raise BadConfig("replay needs --fund, --from and --to (or --config)")
        service = ArenaService(args.data_dir, llm_mode=args.llm_mode, cassette=args.cassette)

    run, records = service.replay(
        fund_id, from_date, to_date, allow_contaminated=args.allow_contaminated, run_id=args.run_id
    )
    for record in records:
        actions = ", ".join(f"{t}:{d.action}" for t, d in sorted(record.decisions.items()))
        print(
            f"{record.trading_date} nav={record.nav_snapshot.to_dict()['nav']} "
            f"fills={len(record.fills)} [{actions}]"
        )
    print(f"run {run.run_id}: {run.status} ({run.cycles_done} cycles)"
          + (" CONTAMINATED" if run.contaminated else ""))
    if run.status != "COMPLETED":
        print(f"CYCLE_FAILED: {run.error}", file=sys.stderr)
        return 3
    return 0


def _cmd_cycle_run(args) -> int:
    service = ArenaService(args.data_dir)
    record = service.run_cycle(args.fund, args.date)
    print(f"{record.trading_date} nav={record.nav_snapshot.to_dict()['nav']} fills={len(record.fills)}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    app = create_app(args.data_dir)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        raise PortInUse(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    return 0


def _cmd_leaderboard(args) -> int:
    service = ArenaService(args.data_dir)
    rows = service.leaderboard(args.rank_key)
    key = rows[0]["rank_key"] if rows else (args.rank_key or service.config.get("rank_key", "sharpe"))
    print(f"{'rank':<5}{'fund':<24}{key:>14}{'cum_return':>14}{'max_dd':>10}{'n_days':>8}")
    for row in rows:
        metrics = row["metrics"]

        def fmt(value, width):
            return f"{value:>{width}.4f}" if value is not None else " " * (width - 3) + "n/a"

        print(
            f"{row['rank']:<5}{row['fund_id']:<24}"
            f"{fmt(metrics.get(key), 14)}{fmt(metrics.get('cumulative_return'), 14)}"
            f"{fmt(metrics.get('max_drawdown'), 10)}{metrics.get('n_days', 0):>8}"
        )
    return 0


def _cmd_export(args) -> int:
    service = ArenaService(args.data_dir)
    bundle = service.export_bundle(args.fund, args.out)
    print(f"exported {bundle}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "init":
            return _cmd_init(args)
        if args.command == "fund":
            return _cmd_fund_create(args)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "cycle":
            return _cmd_cycle_run(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "leaderboard":
            return _cmd_leaderboard(args)
        if args.command == "export":
            return _cmd_export(args)
        parser.error(f"unknown command {args.command}")
    except ArenaError as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
