/**
 * Fund detail: NAV chart, positions, and the paged decision log.
 *
 * Chart points map 1:1 to the /nav series; log pages map 1:1 to /events
 * pages (one fetch per page, rows grouped per cycle x ticker within the
 * page). Rationales are shown verbatim; nothing is recomputed client-side.
 */

import { ArenaApi, ApiError, ArenaEvent, EventPage, FundSummary, NavPoint } from "../api.js";
import { clear, h, svgEl } from "../dom.js";
import { fmtConfidence, fmtMoney, fmtPct } from "../format.js";

const LOG_EVENT_TYPES = ["SignalEmitted", "DecisionMade", "OrderFilled", "OrderSkipped"];
const PAGE_LIMIT = 48;

export interface FundDetailView {
  el: HTMLElement;
  load(): Promise<void>;
  loadLogPage(offset: number): Promise<void>;
}

export function navChart(series: NavPoint[], width = 640, height = 180): SVGElement {
  const svg = svgEl("svg", {
    width: String(width),
    height: String(height),
    class: "nav-chart",
    viewBox: `0 0 ${width} ${height}`,
  });
  if (series.length === 0) return svg;
  const values = series.map((p) => Number(p.nav));
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const pad = 10;
  const spanX = series.length > 1 ? series.length - 1 : 1;
  const spanY = hi - lo || 1;
  const pointAt = (i: number, v: number): [number, number] => [
    pad + (i * (width - 2 * pad)) / spanX,
    height - pad - ((v - lo) * (height - 2 * pad)) / spanY,
  ];
  const coords = values.map((v, i) => pointAt(i, v));
  svg.append(
    svgEl("polyline", {
      points: coords.map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`).join(" "),
      class: "nav-line",
      fill: "none",
    }),
  );
  coords.forEach(([x, y], i) => {
    const dot = svgEl("circle", { cx: x.toFixed(1), cy: y.toFixed(1), r: "2.5", class: "nav-point" });
    dot.append(svgEl("title", {}));
    dot.querySelector("title")!.textContent = `${series[i].trading_date}: ${series[i].nav}`;
    svg.append(dot);
  });
  return svg;
}

interface LogRow {
  date: string;
  ticker: string;
  signals: { kind: string; stance: string; confidence: number; rationale: string }[];
  action: string | null;
  decisionRationale: string;
  fill: string | null;
}

export function groupLogRows(events: ArenaEvent[]): LogRow[] {
  const rows = new Map<string, LogRow>();
  const rowFor = (date: string, ticker: string): LogRow => {
    const key = `${date}|${ticker}`;
    let row = rows.get(key);
    if (!row) {
      row = { date, ticker, signals: [], action: null, decisionRationale: "", fill: null };
      rows.set(key, row);
    }
    return row;
  };
  for (const event of events) {
    const p = event.payload;
    const date = p.trading_date as string;
    switch (event.type) {
      case "SignalEmitted":
        rowFor(date, p.ticker).signals.push({
          kind: p.signal.kind,
          stance: p.signal.stance,
          confidence: p.signal.confidence,
          rationale: p.signal.rationale,
        });
        break;
      case "DecisionMade": {
        const row = rowFor(date, p.ticker);
        row.action = p.decision.action;
        row.decisionRationale = p.decision.rationale;
        break;
      }
      case "OrderFilled": {
        const fill = p.fill;
        rowFor(date, p.ticker).fill = `${fill.action} ${fill.quantity} @ ${fill.price}`;
        break;
      }
      case "OrderSkipped":
        rowFor(date, p.ticker).fill = `skipped: ${p.skip.reason}`;
        break;
    }
  }
  return [...rows.values()];
}

export function fundDetailView(api: ArenaApi, fundId: string, onBack: () => void): FundDetailView {
  const headerHost = h("div", { class: "fund-header" });
  const chartHost = h("div", { class: "chart-host" });
  const positionsHost = h("div", { class: "positions-host" });
  const logHost = h("div", { class: "decision-log" });
  const pagerHost = h("div", { class: "pager" });
  const el = h(
    "section",
    { class: "fund-detail" },
    h("button", { class: "back", onclick: () => onBack() }, "← arena"),
    headerHost,
    chartHost,
    positionsHost,
    h("h3", {}, "Decision log"),
    logHost,
    pagerHost,
  );

  function renderHeader(fund: FundSummary): void {
    clear(headerHost);
    headerHost.append(
      h(
        "div",
        {},
        h("h2", {}, `${fund.name} `, h("code", {}, fund.fund_id)),
        h(
          "p",
          { class: "fund-facts" },
          `model ${fund.model_spec_id} · nav ${fmtMoney(fund.nav)} · return ${fmtPct(fund.cumulative_return)}` +
            ` · ${fund.cycles_completed} cycles` +
            (fund.contaminated ? " · CONTAMINATED" : ""),
        ),
      ),
    );
  }

  function renderPositions(fund: FundSummary): void {
    clear(positionsHost);
    const entries = Object.values(fund.positions);
    if (entries.length === 0) {
      positionsHost.append(h("p", { class: "empty" }, "no open positions"));
      return;
    }
    const body = h("tbody", {});
    for (const position of entries) {
      body.append(
        h(
          "tr",
          { class: "position-row" },
          h("td", {}, position.ticker),
          h("td", {}, String(position.quantity)),
          h("td", {}, fmtMoney(position.avg_cost)),
        ),
      );
    }
    positionsHost.append(
      h("h3", {}, "Positions"),
      h("table", {}, h("thead", {}, h("tr", {}, h("th", {}, "ticker"), h("th", {}, "shares"), h("th", {}, "avg cost"))), body),
    );
  }

  function renderLog(page: EventPage): void {
    clear(logHost);
    const rows = groupLogRows(page.events);
    if (rows.length === 0) {
      logHost.append(h("p", { class: "empty" }, "no decisions yet — run a cycle or a replay"));
      return;
    }
    for (const row of rows) {
      const detail = h(
        "div",
        { class: "row-detail hidden" },
        h(
          "ul",
          { class: "rationales" },
          ...row.signals.map((s) =>
            h("li", {}, h("b", {}, `${s.kind} ${s.stance} (${fmtConfidence(s.confidence)}): `), s.rationale),
          ),
          row.decisionRationale ? h("li", {}, h("b", {}, "manager: "), row.decisionRationale) : null,
        ),
      );
      const stances = h(
        "span",
        { class: "stances" },
        row.signals.map((s) => `${s.kind[0]}:${s.stance[0]}${fmtConfidence(s.confidence)}`).join(" "),
      );
      const summary = h(
        "div",
        {
          class: "log-row",
          "data-date": row.date,
          "data-ticker": row.ticker,
          onclick: () => detail.classList.toggle("hidden"),
        },
        h("span", { class: "log-date" }, row.date),
        h("span", { class: "log-ticker" }, row.ticker),
        stances,
        h("span", { class: "log-action" }, row.action ?? ""),
        h("span", { class: "log-fill" }, row.fill ?? "no fill"),
      );
      logHost.append(h("div", { class: "log-entry" }, summary, detail));
    }
  }

  function renderPager(page: EventPage): void {
    clear(pagerHost);
    const prevOffset = Math.max(0, page.offset - page.limit);
    const nextOffset = page.offset + page.limit;
    if (page.offset > 0) {
      pagerHost.append(h("button", { class: "page-prev", onclick: () => void loadLogPage(prevOffset) }, "newer"));
    }
    pagerHost.append(h("span", { class: "page-info" }, `${page.offset}–${Math.min(nextOffset, page.total)} of ${page.total}`));
    if (nextOffset < page.total) {
      pagerHost.append(h("button", { class: "page-next", onclick: () => void loadLogPage(nextOffset) }, "older"));
    }
  }

  async function loadLogPage(offset: number): Promise<void> {
    const page = await api.events(fundId, { types: LOG_EVENT_TYPES, limit: PAGE_LIMIT, offset });
    renderLog(page);
    renderPager(page);
  }

  async function load(): Promise<void> {
    try {
      const [fund, nav] = await Promise.all([api.fund(fundId), api.nav(fundId)]);
      renderHeader(fund);
      clear(chartHost);
      if (nav.series.length === 0) {
        chartHost.append(h("p", { class: "empty" }, "no NAV history yet"));
      } else {
        chartHost.append(navChart(nav.series));
      }
      renderPositions(fund);
      await loadLogPage(0);
    } catch (error) {
      clear(el);
      if (error instanceof ApiError && error.status === 404) {
        el.append(
          h("div", { class: "not-found" }, h("h2", {}, "fund not found"), h("p", {}, fundId), h("button", { class: "back", onclick: () => onBack() }, "← arena")),
        );
        return;
      }
      throw error;
    }
  }

  return { el, load, loadLogPage };
}
