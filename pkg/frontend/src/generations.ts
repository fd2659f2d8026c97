/** Population browser: one tab per recorded generation, ranked solution
 * cards with pros/cons, and the evolutionary tree underneath.
 *
 * A generation tab shows that generation's members with the ratings recorded
 * when it closed (the gateway sends them); the tree always reflects the
 * current lineage export.
 */

import { Gateway, SolutionRow, SubproblemRow } from "./api.js";
import { h, swap } from "./dom.js";
import { formatRating } from "./format.js";
import { renderTree } from "./lineage.js";

export function solutionCard(row: SolutionRow): HTMLElement {
  return h(
    "div",
    {
      class: row.viable ? "solution-card" : "solution-card nonviable",
      dataset: { id: row.id },
    },
    h(
      "h3",
      {},
      row.title,
      h("span", { class: "origin", text: row.origin }),
    ),
    h("div", {
      class: "elo-rating",
      text: `Elo Rating: ${formatRating(row.rating)}`,
    }),
    h("p", { text: row.description }),
    h(
      "div",
      { class: "card-lists" },
      h(
        "div",
        {},
        h("h4", { text: "Pros" }),
        h("ul", { class: "card-pros" }, row.pros.map((p) => h("li", { text: p }))),
      ),
      h(
        "div",
        {},
        h("h4", { text: "Cons" }),
        h("ul", { class: "card-cons" }, row.cons.map((c) => h("li", { text: c }))),
      ),
    ),
  );
}

export class GenerationBrowser {
  readonly element: HTMLElement;
  private selected: number | null = null;
  private readonly tabBar: HTMLElement;
  private readonly cardPane: HTMLElement;
  private readonly treePane: HTMLElement;

  constructor(
    private readonly gateway: Gateway,
    private readonly subproblem: SubproblemRow,
  ) {
    this.tabBar = h("div", { class: "gen-tabs" });
    this.cardPane = h("div", { class: "solution-cards" });
    this.treePane = h("div", { class: "tree-pane" });
    this.element = h(
      "div",
      { class: "generation-browser" },
      h("h2", { text: subproblem.title }),
      this.tabBar,
      this.cardPane,
      this.treePane,
    );
  }

  async start(): Promise<void> {
    const generations = this.subproblem.generations;
    if (generations.length === 0) {
      swap(this.tabBar);
      swap(
        this.cardPane,
        h("p", { class: "empty-state", text: "No generations recorded yet — run the solutions stage." }),
      );
      return;
    }
    this.renderTabs();
    const last = generations[generations.length - 1];
    await this.select(last ?? 0);
    await this.loadTree();
  }

  private renderTabs(): void {
    swap(
      this.tabBar,
      this.subproblem.generations.map((index) =>
        h("button", {
          class: index === this.selected ? "gen-tab active" : "gen-tab",
          text: `Generation ${index}`,
          dataset: { generation: String(index) },
          onClick: () => void this.select(index),
        }),
      ),
    );
  }

  async select(generation: number): Promise<void> {
    this.selected = generation;
    this.renderTabs();
    const rows = await this.gateway.solutions(this.subproblem.id, generation);
    if (rows.length === 0) {
      swap(
        this.cardPane,
        h("p", { class: "empty-state", text: `Nothing recorded for generation ${generation}.` }),
      );
      return;
    }
    const ranked = [...rows].sort(
      (a, b) => b.rating - a.rating || a.id.localeCompare(b.id),
    );
    swap(this.cardPane, ranked.map(solutionCard));
  }

  async loadTree(): Promise<void> {
    const lineage = await this.gateway.lineage(this.subproblem.id);
    swap(this.treePane, h("h2", { text: "Evolutionary tree" }), renderTree(lineage));
  }
}
