/**
 * Typed client for the arena HTTP API.
 *
 * The console consumes this contract verbatim and performs no financial
 * computation of its own: every number shown in the UI is a field from one
 * of these responses.
 */

export interface ApiErrorBody {
  code: string;
  message: string;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

export interface MetricsReport {
  cumulative_return: number | null;
  annualized_return: number | null;
  volatility: number | null;
  sharpe: number | null;
  sortino: number | null;
  max_drawdown: number | null;
  win_rate: number | null;
  turnover: number | null;
  n_days: number;
}

export interface LeaderboardRow {
  rank: number;
  fund_id: string;
  rank_key: string;
  metrics: MetricsReport;
}

export interface LeaderboardResponse {
  rank_key: string;
  rows: LeaderboardRow[];
}

export interface PositionView {
  ticker: string;
  quantity: number;
  avg_cost: string;
}

export interface FundSummary {
  fund_id: string;
  name: string;
  model_spec_id: string;
  stock_pool: string[];
  cash: string;
  positions: Record<string, PositionView>;
  nav: string;
  cycles_completed: number;
  contaminated: boolean;
  cumulative_return: number | null;
  config: Record<string, unknown>;
}

export interface NavPoint {
  trading_date: string;
  cash: string;
  holdings_value: string;
  nav: string;
}

export interface ArenaEvent {
  seq: number;
  ts: string;
  type: string;
  payload: Record<string, any>;
}

export interface EventPage {
  total: number;
  limit: number;
  offset: number;
  events: ArenaEvent[];
}

export interface RunStatus {
  run_id: string;
  fund_id: string;
  mode: string;
  status: string;
  clock: { instant: string; trading_date: string } | null;
  date_range: string[] | null;
  contaminated: boolean;
  error: string | null;
  cycles_done: number;
}

export interface CreateFundBody {
  name: string;
  model_spec: string;
  stock_pool: string[];
  initial_cash: string;
  config?: Record<string, unknown>;
  inception?: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ArenaApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    const body = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(response.status, body as ApiErrorBody);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("/health");
  }

  leaderboard(rankKey?: string): Promise<LeaderboardResponse> {
    const query = rankKey ? `?rank_key=${encodeURIComponent(rankKey)}` : "";
    return this.request(`/leaderboard${query}`);
  }

  listFunds(): Promise<{ funds: FundSummary[] }> {
    return this.request("/funds");
  }

  fund(fundId: string): Promise<FundSummary> {
    return this.request(`/funds/${encodeURIComponent(fundId)}`);
  }

  nav(fundId: string): Promise<{ fund_id: string; series: NavPoint[] }> {
    return this.request(`/funds/${encodeURIComponent(fundId)}/nav`);
  }

  metrics(fundId: string): Promise<{ fund_id: string; metrics: MetricsReport }> {
    return this.request(`/funds/${encodeURIComponent(fundId)}/metrics`);
  }

  events(
    fundId: string,
    options: { types?: string[]; from?: string; to?: string; ticker?: string; limit?: number; offset?: number } = {},
  ): Promise<EventPage> {
    const params = new URLSearchParams();
    if (options.types?.length) params.set("types", options.types.join(","));
    if (options.from) params.set("from", options.from);
    if (options.to) params.set("to", options.to);
    if (options.ticker) params.set("ticker", options.ticker);
    if (options.limit !== undefined) params.set("limit", String(options.limit));
    if (options.offset !== undefined) params.set("offset", String(options.offset));
    const query = params.toString();
    return this.request(`/funds/${encodeURIComponent(fundId)}/events${query ? "?" + query : ""}`);
  }

  createFund(body: CreateFundBody): Promise<{ fund_id: string }> {
    return this.post("/funds", body);
  }

  startReplay(fundId: string, from: string, to: string, allowContaminated = false): Promise<{ run_id: string; status: string }> {
    return this.post(`/funds/${encodeURIComponent(fundId)}/replay`, {
      from,
      to,
      allow_contaminated: allowContaminated,
    });
  }

  startCycle(fundId: string, date: string): Promise<{ run_id: string; status: string }> {
    return this.post(`/funds/${encodeURIComponent(fundId)}/cycles`, { date });
  }

  run(runId: string): Promise<RunStatus> {
    return this.request(`/runs/${encodeURIComponent(runId)}`);
  }

  controlRun(runId: string, command: "PAUSE" | "RESUME" | "ABORT"): Promise<RunStatus> {
    return this.post(`/runs/${encodeURIComponent(runId)}/control`, { command });
  }
}
