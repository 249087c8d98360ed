/**
 * Console bootstrap: hash routing between the arena dashboard (leaderboard
 * plus operator panel) and per-fund detail pages.
 */

import { ArenaApi } from "./api.js";
import { clear, h } from "./dom.js";
import { PollerOptions } from "./poll.js";
import { fundDetailView } from "./views/fundDetail.js";
import { leaderboardView } from "./views/leaderboard.js";
import { operatorView } from "./views/operator.js";

export interface AppOptions {
  api?: ArenaApi;
  pollerOptions?: PollerOptions;
  window?: Window;
}

export function mountApp(root: HTMLElement, options: AppOptions = {}): { navigate(hash: string): Promise<void> } {
  const win = options.window ?? window;
  const api = options.api ?? new ArenaApi("");

  async function renderDashboard(): Promise<void> {
    clear(root);
    const board = leaderboardView(api, (fundId) => void navigate(`#/funds/${fundId}`));
    const operator = operatorView(api, () => void board.refresh(), options.pollerOptions);
    root.append(h("h1", {}, "fund arena"), board.el, operator.el);
    await board.refresh();
  }

  async function renderFund(fundId: string): Promise<void> {
    clear(root);
    const view = fundDetailView(api, fundId, () => void navigate("#/"));
    root.append(view.el);
    await view.load();
  }

  async function navigate(hash: string): Promise<void> {
    if (win.location.hash !== hash) {
      win.location.hash = hash;
    }
    const fundMatch = /^#\/funds\/([^/]+)$/.exec(hash);
    if (fundMatch) {
      await renderFund(decodeURIComponent(fundMatch[1]));
    } else {
      await renderDashboard();
    }
  }

  win.addEventListener("hashchange", () => void navigate(win.location.hash || "#/"));
  return { navigate };
}
