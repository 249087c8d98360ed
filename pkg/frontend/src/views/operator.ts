/**
 * Operator actions: create a fund, start a replay, trigger a cycle, and
 * pause/resume/abort a run. Every action issues exactly one POST to its
 * documented endpoint; client-side validation failures never reach the
 * network. A started run gets a status chip that polls GET /runs/{id}
 * until the run is terminal.
 */

import { ArenaApi, ApiError } from "../api.js";
import { clear, h } from "../dom.js";
import { Poller, PollerOptions } from "../poll.js";

export interface OperatorView {
  el: HTMLElement;
  createFund(): Promise<string | null>;
  startReplay(): Promise<string | null>;
  pollers: Poller[];
}

const TERMINAL = new Set(["COMPLETED", "FAILED"]);

export function operatorView(
  api: ArenaApi,
  onFundsChanged: () => void,
  pollerOptions: PollerOptions = {},
): OperatorView {
  const pollers: Poller[] = [];

  // --- create fund form ---
  const nameInput = h("input", { name: "name", placeholder: "Fund name" }) as HTMLInputElement;
  const modelInput = h("input", { name: "model_spec", placeholder: "model spec id (e.g. mock-balanced)" }) as HTMLInputElement;
  const poolInput = h("input", { name: "stock_pool", placeholder: "tickers, comma separated" }) as HTMLInputElement;
  const cashInput = h("input", { name: "initial_cash", placeholder: "initial cash" }) as HTMLInputElement;
  const inceptionInput = h("input", { name: "inception", placeholder: "inception YYYY-MM-DD (optional)" }) as HTMLInputElement;
  const createErrors = h("p", { class: "form-errors" });
  const createStatus = h("p", { class: "form-status" });

  function inlineError(input: HTMLInputElement, message: string): null {
    clear(createErrors);
    createErrors.append(h("span", { class: "field-error", "data-field": input.name }, message));
    input.classList.add("invalid");
    return null;
  }

  async function createFund(): Promise<string | null> {
    clear(createErrors);
    for (const input of [nameInput, modelInput, poolInput, cashInput]) input.classList.remove("invalid");

    const name = nameInput.value.trim();
    if (!name) return inlineError(nameInput, "name is required");
    const model = modelInput.value.trim();
    if (!model) return inlineError(modelInput, "model spec id is required");
    const pool = poolInput.value
      .split(",")
      .map((t) => t.trim().toUpperCase())
      .filter(Boolean);
    if (pool.length === 0) return inlineError(poolInput, "at least one ticker");
    const cash = cashInput.value.trim();
    if (!cash || !/^\d+(\.\d+)?$/.test(cash) || Number(cash) <= 0) {
      return inlineError(cashInput, "initial cash must be a positive number");
    }

    try {
      const body = {
        name,
        model_spec: model,
        stock_pool: pool,
        initial_cash: cash,
        ...(inceptionInput.value.trim() ? { inception: inceptionInput.value.trim() } : {}),
      };
      const created = await api.createFund(body);
      clear(createStatus);
      createStatus.append(h("span", {}, `created ${created.fund_id}`));
      onFundsChanged();
      return created.fund_id;
    } catch (error) {
      if (error instanceof ApiError) {
        clear(createErrors);
        createErrors.append(h("span", { class: "field-error", "data-field": "server" }, `${error.code}: ${error.message}`));
        return null;
      }
      throw error;
    }
  }

  const createForm = h(
    "form",
    {
      class: "create-fund-form",
      onsubmit: (event: Event) => {
        event.preventDefault();
        void createFund();
      },
    },
    nameInput,
    modelInput,
    poolInput,
    cashInput,
    inceptionInput,
    h("button", { type: "submit", class: "create-fund" }, "create fund"),
    createErrors,
    createStatus,
  );

  // --- replay / cycle launcher ---
  const fundInput = h("input", { name: "fund_id", placeholder: "fund id" }) as HTMLInputElement;
  const fromInput = h("input", { name: "from", placeholder: "from YYYY-MM-DD" }) as HTMLInputElement;
  const toInput = h("input", { name: "to", placeholder: "to YYYY-MM-DD" }) as HTMLInputElement;
  const allowContaminated = h("input", { type: "checkbox", name: "allow_contaminated" }) as HTMLInputElement;
  const runErrors = h("p", { class: "form-errors run-errors" });
  const runsHost = h("div", { class: "runs" });

  function runChip(runId: string, initialStatus: string): HTMLElement {
    const statusSpan = h("span", { class: "chip-status", "data-run-id": runId }, initialStatus);
    const pauseBtn = h("button", { class: "chip-pause", onclick: () => void control("PAUSE") }, "pause");
    const resumeBtn = h("button", { class: "chip-resume", onclick: () => void control("RESUME") }, "resume");
    const abortBtn = h("button", { class: "chip-abort", onclick: () => void control("ABORT") }, "abort");
    const chip = h("div", { class: "run-chip" }, h("code", {}, runId), statusSpan, pauseBtn, resumeBtn, abortBtn);

    async function control(command: "PAUSE" | "RESUME" | "ABORT"): Promise<void> {
      try {
        await api.controlRun(runId, command);
      } catch (error) {
        if (!(error instanceof ApiError)) throw error;
        statusSpan.setAttribute("data-error", `${error.code}`);
      }
    }

    const poller = new Poller(pollerOptions);
    pollers.push(poller);
    poller.start(async () => {
      const run = await api.run(runId);
      statusSpan.textContent = run.status + (run.contaminated ? " (CONTAMINATED)" : "");
      if (TERMINAL.has(run.status)) {
        chip.classList.add("terminal");
        onFundsChanged();
        return "done";
      }
      return "active";
    });
    return chip;
  }

  async function startReplay(): Promise<string | null> {
    clear(runErrors);
    const fundId = fundInput.value.trim();
    const from = fromInput.value.trim();
    const to = toInput.value.trim();
    if (!fundId || !from || !to) {
      runErrors.append(h("span", { class: "field-error" }, "fund, from and to are required"));
      return null;
    }
    try {
      const started = await api.startReplay(fundId, from, to, allowContaminated.checked);
      runsHost.append(runChip(started.run_id, started.status));
      return started.run_id;
    } catch (error) {
      if (error instanceof ApiError) {
        runErrors.append(h("span", { class: "field-error" }, `${error.code}: ${error.message}`));
        return null;
      }
      throw error;
    }
  }

  async function startCycle(): Promise<string | null> {
    clear(runErrors);
    const fundId = fundInput.value.trim();
    const date = fromInput.value.trim();
    if (!fundId || !date) {
      runErrors.append(h("span", { class: "field-error" }, "fund and a date (in the from field) are required"));
      return null;
    }
    const started = await api.startCycle(fundId, date);
    runsHost.append(runChip(started.run_id, started.status));
    return started.run_id;
  }

  const runForm = h(
    "form",
    {
      class: "run-form",
      onsubmit: (event: Event) => {
        event.preventDefault();
        void startReplay();
      },
    },
    fundInput,
    fromInput,
    toInput,
    h("label", { class: "contaminated-label" }, allowContaminated, " allow contaminated"),
    h("button", { type: "submit", class: "start-replay" }, "start replay"),
    h(
      "button",
      {
        type: "button",
        class: "run-cycle",
        onclick: () => void startCycle(),
      },
      "run one cycle",
    ),
    runErrors,
  );

  const el = h(
    "section",
    { class: "operator" },
    h("h2", {}, "Operator"),
    h("h3", {}, "New fund"),
    createForm,
    h("h3", {}, "Runs"),
    runForm,
    runsHost,
  );

  return { el, createFund, startReplay, pollers };
}
