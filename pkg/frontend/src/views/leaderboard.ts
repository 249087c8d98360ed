/**
 * Ranked arena table. Row order mirrors GET /leaderboard exactly; switching
 * the rank key re-queries the API rather than re-sorting locally. An API
 * failure shows a retry banner and never leaves stale rows behind.
 */

import { ArenaApi, LeaderboardResponse } from "../api.js";
import { clear, h } from "../dom.js";
import { fmtMetric, fmtPct } from "../format.js";

export const RANK_KEYS = [
  "sharpe",
  "cumulative_return",
  "annualized_return",
  "volatility",
  "sortino",
  "max_drawdown",
  "win_rate",
  "turnover",
];

export interface LeaderboardView {
  el: HTMLElement;
  refresh(rankKey?: string): Promise<void>;
  currentRankKey(): string;
}

export function leaderboardView(api: ArenaApi, onOpenFund: (fundId: string) => void): LeaderboardView {
  let rankKey = "sharpe";

  const selector = h("select", { class: "rank-key-selector", onchange: () => void refresh(selector.value) }) as HTMLSelectElement;
  for (const key of RANK_KEYS) {
    selector.append(h("option", { value: key }, key));
  }

  const banner = h("div", { class: "error-banner hidden" });
  const tableHost = h("div", { class: "leaderboard-table" });
  const el = h(
    "section",
    { class: "leaderboard" },
    h("header", { class: "section-header" }, h("h2", {}, "Leaderboard"), h("label", {}, "rank by ", selector)),
    banner,
    tableHost,
  );

  function renderRows(data: LeaderboardResponse): void {
    clear(tableHost);
    const head = h(
      "tr",
      {},
      h("th", {}, "#"),
      h("th", {}, "fund"),
      h("th", {}, data.rank_key),
      h("th", {}, "cum return"),
      h("th", {}, "max drawdown"),
      h("th", {}, "days"),
    );
    const body = h("tbody", {});
    for (const row of data.rows) {
      const metrics = row.metrics;
      body.append(
        h(
          "tr",
          { class: "leaderboard-row", "data-fund-id": row.fund_id },
          h("td", {}, String(row.rank)),
          h(
            "td",
            {},
            h("a", { href: `#/funds/${row.fund_id}`, onclick: () => onOpenFund(row.fund_id) }, row.fund_id),
          ),
          h("td", {}, fmtMetric((metrics as any)[data.rank_key] ?? null)),
          h("td", {}, fmtPct(metrics.cumulative_return)),
          h("td", {}, fmtPct(metrics.max_drawdown)),
          h("td", {}, String(metrics.n_days)),
        ),
      );
    }
    tableHost.append(h("table", {}, h("thead", {}, head), body));
  }

  async function refresh(nextKey?: string): Promise<void> {
    if (nextKey) rankKey = nextKey;
    selector.value = rankKey;
    try {
      const data = await api.leaderboard(rankKey);
      banner.classList.add("hidden");
      clear(banner);
      renderRows(data);
    } catch (error) {
      clear(tableHost); // no stale rows on failure
      clear(banner);
      banner.classList.remove("hidden");
      banner.append(
        h("span", {}, `leaderboard unavailable: ${error instanceof Error ? error.message : String(error)} `),
        h("button", { class: "retry", onclick: () => void refresh() }, "retry"),
      );
    }
  }

  return { el, refresh, currentRankKey: () => rankKey };
}
