/** Shared test scaffolding: jsdom globals and the fixture arena API. */

import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";
import { JSDOM } from "jsdom";

export function setupDom(): JSDOM {
  const dom = new JSDOM('<!doctype html><html><body><main id="app"></main></body></html>', {
    url: "http://console.local/",
  });
  const g = globalThis as any;
  g.window = dom.window;
  g.document = dom.window.document;
  for (const name of ["HTMLElement", "HTMLInputElement", "HTMLSelectElement", "SVGElement", "Event", "Node", "CustomEvent"]) {
    g[name] = dom.window[name];
  }
  return dom;
}

export interface RecordedRequest {
  method: string;
  path: string;
  query: Record<string, string>;
  body: any;
}

export interface FixtureApi {
  baseUrl: string;
  requests: RecordedRequest[];
  posts(): RecordedRequest[];
  close(): Promise<void>;
  server: Server;
  /** mutable flag: when true every request returns 503 */
  down: boolean;
  /** run statuses served in order for GET /runs/{id}; last repeats */
  runStatuses: string[];
}

const LEADERBOARD_SHARPE = {
  rank_key: "sharpe",
  rows: [
    { rank: 1, fund_id: "beta", rank_key: "sharpe", metrics: metricsOf(1.4, 0.21) },
    { rank: 2, fund_id: "alpha", rank_key: "sharpe", metrics: metricsOf(0.9, 0.35) },
    { rank: 3, fund_id: "gamma", rank_key: "sharpe", metrics: metricsOf(-0.2, 0.02) },
  ],
};

const LEADERBOARD_TURNOVER = {
  rank_key: "turnover",
  rows: [
    { rank: 1, fund_id: "gamma", rank_key: "turnover", metrics: metricsOf(-0.2, 0.02) },
    { rank: 2, fund_id: "beta", rank_key: "turnover", metrics: metricsOf(1.4, 0.21) },
    { rank: 3, fund_id: "alpha", rank_key: "turnover", metrics: metricsOf(0.9, 0.35) },
  ],
};

function metricsOf(sharpe: number, cumulative: number) {
  return {
    cumulative_return: cumulative,
    annualized_return: cumulative * 2,
    volatility: 0.12,
    sharpe,
    sortino: sharpe * 1.1,
    max_drawdown: 0.08,
    win_rate: 0.55,
    turnover: 1.9,
    n_days: 10,
  };
}

const NAV_SERIES = Array.from({ length: 10 }, (_, i) => ({
  trading_date: `2025-06-${String(2 + i).padStart(2, "0")}`,
  cash: "50000.000000",
  holdings_value: "50000.000000",
  nav: `${100000 + 120 * i}.000000`,
}));

const FUND_ALPHA = {
  fund_id: "alpha",
  name: "Alpha Fund",
  model_spec_id: "mock-balanced",
  stock_pool: ["AAPL", "MSFT"],
  cash: "50000.000000",
  positions: { AAPL: { ticker: "AAPL", quantity: 10, avg_cost: "101.000000" } },
  nav: "101080.000000",
  cycles_completed: 10,
  contaminated: false,
  cumulative_return: 0.0108,
  config: {},
};

const FUND_EMPTY = {
  ...FUND_ALPHA,
  fund_id: "empty-fund",
  name: "Empty Fund",
  positions: {},
  cycles_completed: 0,
  cumulative_return: null,
  nav: "100000.000000",
};

function signalEvent(seq: number, kind: string, stance: string, confidence: number) {
  return {
    seq,
    ts: "2025-06-02T22:00:00Z",
    type: "SignalEmitted",
    payload: {
      trading_date: "2025-06-02",
      ticker: "AAPL",
      signal: { kind, ticker: "AAPL", stance, confidence, rationale: `${kind} rationale text`, key_evidence: [] },
      outcome: {},
    },
  };
}

const ALPHA_EVENTS = {
  total: 6,
  limit: 48,
  offset: 0,
  events: [
    signalEvent(2, "TECHNICAL", "BULLISH", 0.8),
    signalEvent(3, "FUNDAMENTAL", "NEUTRAL", 0.5),
    signalEvent(4, "INSIDER", "BULLISH", 0.66),
    signalEvent(5, "MEDIA", "BEARISH", 0.4),
    {
      seq: 6,
      ts: "2025-06-02T22:00:00Z",
      type: "DecisionMade",
      payload: {
        trading_date: "2025-06-02",
        ticker: "AAPL",
        decision: { ticker: "AAPL", action: "BUY", quantity: 10, confidence: 0.7, rationale: "manager rationale text" },
        outcome: {},
      },
    },
    {
      seq: 7,
      ts: "2025-06-02T22:00:00Z",
      type: "OrderFilled",
      payload: {
        trading_date: "2025-06-02",
        ticker: "AAPL",
        fill: { ticker: "AAPL", action: "BUY", quantity: 10, price: "101.000000", fee: "0.000000" },
      },
    },
  ],
};

export async function startFixtureApi(): Promise<FixtureApi> {
  const requests: RecordedRequest[] = [];
  const api: Partial<FixtureApi> = { requests, down: false, runStatuses: ["RUNNING", "RUNNING", "COMPLETED"] };
  let runPolls = 0;

  const server = createServer(async (req: IncomingMessage, res: ServerResponse) => {
    const url = new URL(req.url ?? "/", "http://fixture.local");
    const chunks: Buffer[] = [];
    for await (const chunk of req) chunks.push(chunk as Buffer);
    const raw = Buffer.concat(chunks).toString("utf-8");
    const body = raw ? JSON.parse(raw) : null;
    requests.push({
      method: req.method ?? "GET",
      path: url.pathname,
      query: Object.fromEntries(url.searchParams.entries()),
      body,
    });

    const send = (status: number, payload: unknown) => {
      res.writeHead(status, { "content-type": "application/json" });
      res.end(JSON.stringify(payload));
    };

    if (api.down) return send(503, { code: "PROVIDER_UNAVAILABLE", message: "fixture down" });

    const path = url.pathname;
    const method = req.method;
    if (method === "GET" && path === "/leaderboard") {
      return send(200, url.searchParams.get("rank_key") === "turnover" ? LEADERBOARD_TURNOVER : LEADERBOARD_SHARPE);
    }
    if (method === "GET" && path === "/funds/alpha") return send(200, FUND_ALPHA);
    if (method === "GET" && path === "/funds/alpha/nav") return send(200, { fund_id: "alpha", series: NAV_SERIES });
    if (method === "GET" && path === "/funds/alpha/events") return send(200, ALPHA_EVENTS);
    if (method === "GET" && path === "/funds/empty-fund") return send(200, FUND_EMPTY);
    if (method === "GET" && path === "/funds/empty-fund/nav") return send(200, { fund_id: "empty-fund", series: [] });
    if (method === "GET" && path === "/funds/empty-fund/events") return send(200, { total: 0, limit: 48, offset: 0, events: [] });
    if (method === "POST" && path === "/funds") return send(201, { fund_id: "new-fund" });
    if (method === "POST" && path === "/funds/alpha/replay") return send(202, { run_id: "run-1", status: "CREATED" });
    if (method === "POST" && path === "/funds/alpha/cycles") return send(202, { run_id: "cycle-run-1", status: "CREATED" });
    if (method === "GET" && path === "/runs/run-1") {
      const statuses = api.runStatuses!;
      const status = statuses[Math.min(runPolls, statuses.length - 1)];
      runPolls += 1;
      return send(200, {
        run_id: "run-1",
        fund_id: "alpha",
        mode: "REPLAY",
        status,
        clock: null,
        date_range: ["2025-06-02", "2025-06-13"],
        contaminated: false,
        error: null,
        cycles_done: status === "COMPLETED" ? 10 : 3,
      });
    }
    if (method === "POST" && path === "/runs/run-1/control") {
      return send(200, {
        run_id: "run-1",
        fund_id: "alpha",
        mode: "REPLAY",
        status: body?.command === "PAUSE" ? "PAUSED" : "RUNNING",
        clock: null,
        date_range: null,
        contaminated: false,
        error: null,
        cycles_done: 3,
      });
    }
    return send(404, { code: "UNKNOWN_FUND", message: `${path} not found` });
  });

  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const address = server.address();
  if (address === null || typeof address === "string") throw new Error("no port");
  api.baseUrl = `http://127.0.0.1:${address.port}`;
  api.server = server;
  api.posts = () => requests.filter((r) => r.method === "POST");
  api.close = () => new Promise((resolve) => server.close(() => resolve()));
  return api as FixtureApi;
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
