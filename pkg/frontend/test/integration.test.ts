/**
 * Full-stack smoke: the console against the real arena service.
 *
 * Needs the Python package on PATH (run from the repo with ARENA_E2E=1);
 * skipped otherwise so the frontend suite stays self-contained.
 */

import assert from "node:assert/strict";
import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { test } from "node:test";

import { setupDom } from "./helpers.js";

const RUN_E2E = process.env.ARENA_E2E === "1";

function cli(args: string[], dataDir: string): Promise<number> {
  return new Promise((resolve, reject) => {
    const proc = spawn("python3", ["-m", "fundarena.cli", ...args, "--data-dir", dataDir], { stdio: "ignore" });
    proc.on("exit", (code) => resolve(code ?? 1));
    proc.on("error", reject);
  });
}

async function waitForHealth(base: string): Promise<void> {
  const deadline = Date.now() + 20000;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${base}/health`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("arena API did not come up");
}

test("console renders real arena state end to end", { skip: !RUN_E2E }, async () => {
  setupDom();
  const dataDir = mkdtempSync(join(tmpdir(), "arena-e2e-"));
  assert.equal(await cli(["init"], dataDir), 0);
  assert.equal(
    await cli(
      ["fund", "create", "--name", "E2E Console Fund", "--model", "mock-balanced", "--pool", "AAPL,MSFT,NVDA,AMZN,GOOG", "--cash", "100000"],
      dataDir,
    ),
    0,
  );
  assert.equal(await cli(["replay", "--fund", "e2e-console-fund", "--from", "2025-06-02", "--to", "2025-06-13"], dataDir), 0);

  const port = 8000 + Math.floor(Math.random() * 1000);
  const server: ChildProcess = spawn(
    "python3",
    ["-m", "fundarena.cli", "serve", "--data-dir", dataDir, "--port", String(port)],
    { stdio: "ignore" },
  );
  try {
    const base = `http://127.0.0.1:${port}`;
    await waitForHealth(base);

    const { ArenaApi } = await import("../src/api.js");
    const { leaderboardView } = await import("../src/views/leaderboard.js");
    const { fundDetailView } = await import("../src/views/fundDetail.js");
    const api = new ArenaApi(base);

    const board = leaderboardView(api, () => undefined);
    await board.refresh();
    const rendered = [...board.el.querySelectorAll("tr.leaderboard-row")].map((tr) => (tr as HTMLElement).getAttribute("data-fund-id"));
    const apiRows = (await api.leaderboard()).rows.map((r) => r.fund_id);
    assert.deepEqual(rendered, apiRows);

    const detail = fundDetailView(api, "e2e-console-fund", () => undefined);
    await detail.load();
    const navLength = (await api.nav("e2e-console-fund")).series.length;
    assert.equal(navLength, 10);
    assert.equal(detail.el.querySelectorAll("svg.nav-chart circle.nav-point").length, navLength);
    assert.ok(detail.el.querySelectorAll(".log-row").length > 0);
  } finally {
    server.kill();
  }
});
