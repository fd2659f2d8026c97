/** App shell: header, section nav, and the panels wired to one gateway.
 *
 * The shell holds no data of its own — switching sections re-reads from the
 * gateway, so the view after a reload equals the view before it.
 */

import { Gateway, ProjectSummary, SubproblemRow, TournamentSummary } from "./api.js";
import { h, swap } from "./dom.js";
import { GenerationBrowser } from "./generations.js";
import { PolicyList } from "./policies.js";
import { RunPanel } from "./runs.js";
import { SubproblemPanel } from "./subproblems.js";
import { VotingView } from "./voting.js";

type Section = "subproblems" | "solutions" | "voting" | "policies" | "runs";

const SECTIONS: { id: Section; label: string }[] = [
  { id: "subproblems", label: "Sub-problems" },
  { id: "solutions", label: "Solutions" },
  { id: "voting", label: "Voting" },
  { id: "policies", label: "Policies" },
  { id: "runs", label: "Runs" },
];

export class App {
  readonly element: HTMLElement;
  private section: Section = "subproblems";
  private readonly header = h("header", { class: "app-header" });
  private readonly nav = h("nav", { class: "app-nav" });
  private readonly body = h("main", { class: "app-body" });
  private summary: ProjectSummary | null = null;

  constructor(private readonly gateway: Gateway) {
    this.element = h("div", { class: "app" }, this.header, this.nav, this.body);
  }

  async start(): Promise<void> {
    this.summary = await this.gateway.project();
    this.renderHeader();
    this.renderNav();
    await this.show(this.section);
  }

  private renderHeader(): void {
    const s = this.summary;
    if (!s) return;
    swap(
      this.header,
      h("h1", { text: s.project_id }),
      h("span", { class: "statement", text: s.statement.text }),
      h("span", {
        class: "hint",
        text:
          `${s.counts.subproblems} sub-problems · ${s.counts.solutions} solutions · ` +
          `${s.counts.policies} policies · ${s.counts.sources} sources`,
      }),
    );
  }

  private renderNav(): void {
    swap(
      this.nav,
      SECTIONS.map(({ id, label }) =>
        h("button", {
          class: id === this.section ? "active" : "",
          text: label,
          dataset: { section: id },
          onClick: () => void this.show(id),
        }),
      ),
    );
  }

  private async show(section: Section): Promise<void> {
    this.section = section;
    this.renderNav();
    this.summary = await this.gateway.project();
    this.renderHeader();
    swap(this.body, h("p", { class: "loading", text: "Loading…" }));
    switch (section) {
      case "subproblems":
        return this.showSubproblems();
      case "solutions":
        return this.showSolutions();
      case "voting":
        return this.showVoting();
      case "policies":
        return this.showPolicies();
      case "runs":
        return this.showRuns();
    }
  }

  private async showSubproblems(): Promise<void> {
    const panel = new SubproblemPanel(this.gateway, (row) => void this.showBrowser(row));
    await panel.refresh();
    swap(
      this.body,
      h(
        "section",
        { class: "panel" },
        h("h2", { text: "Sub-problems" }),
        h("p", {
          class: "hint",
          text: "Deactivated rows are skipped by every later stage. Click a title to browse its solutions.",
        }),
        panel.element,
      ),
    );
  }

  private async showSolutions(): Promise<void> {
    const rows = await this.gateway.subproblems();
    const withGenerations = rows.filter((r) => r.generations.length > 0);
    if (withGenerations.length === 0) {
      swap(
        this.body,
        h("section", { class: "panel" },
          h("p", { class: "empty-state", text: "No recorded generations — run the solutions stage first." })),
      );
      return;
    }
    await this.showBrowser(withGenerations[0] as SubproblemRow);
  }

  private async showBrowser(row: SubproblemRow): Promise<void> {
    this.section = "solutions";
    this.renderNav();
    const browser = new GenerationBrowser(this.gateway, row);
    swap(this.body, h("section", { class: "panel" }, browser.element));
    await browser.start();
  }

  private async showVoting(): Promise<void> {
    const s = this.summary;
    const open = (s?.tournaments ?? []).filter(
      (t: TournamentSummary) => t.voter_kind === "human" && t.open,
    );
    if (open.length === 0) {
      swap(
        this.body,
        h("section", { class: "panel" },
          h("h2", { text: "Voting" }),
          h("p", { class: "empty-state", text: "No open voting tournaments right now." })),
      );
      return;
    }
    const list = h(
      "ul",
      { class: "tournament-list" },
      open.map((t) =>
        h(
          "li",
          {},
          h("button", {
            text: `${t.id} — ${t.kind}, ${t.open_pairs} open pairs`,
            dataset: { tournament: t.id },
            onClick: () => void startVoting(t.id),
          }),
        ),
      ),
    );
    const host = h("div", {});
    const startVoting = async (tid: string): Promise<void> => {
      const view = new VotingView(this.gateway, tid);
      swap(host, view.element);
      await view.start();
    };
    swap(this.body, h("section", { class: "panel" }, h("h2", { text: "Voting" }), list, host));
    if (open.length === 1 && open[0]) await startVoting(open[0].id);
  }

  private async showPolicies(): Promise<void> {
    const list = new PolicyList(this.gateway);
    list.render(this.summary?.policies ?? []);
    swap(
      this.body,
      h("section", { class: "panel" }, h("h2", { text: "Policies" }), list.element),
    );
  }

  private async showRuns(): Promise<void> {
    const panel = new RunPanel(this.gateway, () => void this.refreshSummary());
    swap(
      this.body,
      h("section", { class: "panel" }, h("h2", { text: "Pipeline runs" }), panel.element),
    );
    if (this.summary?.active_run) await panel.attach(this.summary.active_run);
  }

  private async refreshSummary(): Promise<void> {
    this.summary = await this.gateway.project();
    this.renderHeader();
  }
}
