/** Start pipeline stages and watch their progress.
 *
 * Events stream by long-poll: each request tells the gateway to hold for up
 * to POLL_WAIT_S seconds, and the client loops immediately after every
 * response, so updates land within ~2 s without any push channel.
 */

import { ApiError, Gateway, RunEvent } from "./api.js";
import { h, swap } from "./dom.js";

export const POLL_WAIT_S = 2;
const STAGES = ["problems", "solutions", "policies", "evidence", "all"];

function describeEvent(event: RunEvent): string {
  const p = event.payload as Record<string, unknown>;
  switch (event.kind) {
    case "node_started":
      return `started ${String(p.node)}`;
    case "node_done":
      return `finished ${String(p.node)}`;
    case "generation_done":
      return `${String(p.subproblem_id)} ${String(p.kind)} generation ${String(p.index)} (${String(p.members)} members)`;
    case "item_persisted":
      return `saved ${String(p.type)} ${String(p.id)}: ${String(p.title)}`;
    case "warning":
      return `warning: ${String(p.message)}`;
    case "completed":
      return "run completed";
    case "failed":
      return `run failed: ${String(p.error)}`;
    default:
      return `${event.kind}`;
  }
}

export class RunPanel {
  readonly element: HTMLElement;
  private status: string | null = null;
  private runId: string | null = null;
  private events: RunEvent[] = [];
  private error: string | null = null;
  private watching = false;

  constructor(
    private readonly gateway: Gateway,
    private readonly onFinished?: () => void,
  ) {
    this.element = h("div", { class: "run-panel" });
    this.render();
  }

  private async start(stage: string): Promise<void> {
    this.error = null;
    try {
      const started = await this.gateway.startRun(stage);
      this.runId = started.run_id;
      this.status = started.status;
      this.events = [];
      this.render();
      void this.watch(started.run_id);
    } catch (err) {
      this.error = err instanceof ApiError ? err.message : String(err);
      this.render();
    }
  }

  /** Follow an already-active run (e.g. page reload while one is going). */
  async attach(runId: string): Promise<void> {
    this.runId = runId;
    this.status = "running";
    this.events = [];
    this.render();
    await this.watch(runId);
  }

  private async watch(runId: string): Promise<void> {
    if (this.watching) return;
    this.watching = true;
    let since = 0;
    try {
      while (this.status === "running") {
        const doc = await this.gateway.runEvents(runId, since, POLL_WAIT_S);
        this.status = doc.status;
        if (doc.events.length > 0) {
          this.events.push(...doc.events);
          since = doc.last_sequence;
        }
        this.render();
      }
      this.onFinished?.();
    } catch (err) {
      this.error = err instanceof Error ? err.message : String(err);
      this.render();
    } finally {
      this.watching = false;
    }
  }

  private render(): void {
    const select = h("select", {}) as HTMLSelectElement;
    for (const stage of STAGES) {
      const option = document.createElement("option");
      option.value = stage;
      option.textContent = stage;
      select.append(option);
    }
    const running = this.status === "running";
    swap(
      this.element,
      h(
        "div",
        { class: "run-controls" },
        select,
        h("button", {
          class: "run-start",
          text: "Start run",
          disabled: running,
          onClick: () => void this.start(select.value),
        }),
        this.status
          ? h("span", { class: `run-status ${this.status}`, text: `${this.runId}: ${this.status}` })
          : null,
      ),
      this.error ? h("p", { class: "run-error", text: this.error }) : null,
      this.events.length > 0
        ? h("ol", { class: "run-log" }, this.events.map((e) => h("li", { text: describeEvent(e) })))
        : null,
    );
  }
}
