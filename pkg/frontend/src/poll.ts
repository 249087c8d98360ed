/**
 * Polling loop matching the API's 202+poll contract: a fixed interval while
 * work is in flight, backing off when the subject goes idle or terminal.
 */

export interface PollerOptions {
  intervalMs?: number;
  idleBackoffMs?: number;
  setTimeoutFn?: typeof setTimeout;
  clearTimeoutFn?: typeof clearTimeout;
}

export class Poller {
  private readonly intervalMs: number;
  private readonly idleBackoffMs: number;
  private readonly setTimeoutFn: typeof setTimeout;
  private readonly clearTimeoutFn: typeof clearTimeout;
  private handle: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(options: PollerOptions = {}) {
    this.intervalMs = options.intervalMs ?? 2000;
    this.idleBackoffMs = options.idleBackoffMs ?? 10000;
    this.setTimeoutFn = options.setTimeoutFn ?? setTimeout;
    this.clearTimeoutFn = options.clearTimeoutFn ?? clearTimeout;
  }

  /**
   * Calls `tick` repeatedly. `tick` returns "active" to keep the fast
   * interval, "idle" to back off, or "done" to stop.
   */
  start(tick: () => Promise<"active" | "idle" | "done">): void {
    const loop = async () => {
      if (this.stopped) return;
      let verdict: "active" | "idle" | "done" = "idle";
      try {
        verdict = await tick();
      } catch {
        verdict = "idle"; // transient API failure: keep polling, backed off
      }
      if (this.stopped || verdict === "done") return;
      const delay = verdict === "active" ? this.intervalMs : this.idleBackoffMs;
      this.handle = this.setTimeoutFn(loop, delay);
    };
    void loop();
  }

  stop(): void {
    this.stopped = true;
    if (this.handle !== null) this.clearTimeoutFn(this.handle);
  }
}
