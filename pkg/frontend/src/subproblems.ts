/** Sub-problem curation: ratings at a glance plus activate/deactivate
 * toggles. Conflicts and missing rows surface inline on the row, and the
 * list re-reads from the gateway afterwards so a stale row heals itself.
 */

import { ApiError, Gateway, SubproblemRow } from "./api.js";
import { h, swap } from "./dom.js";
import { formatRating } from "./format.js";

export class SubproblemPanel {
  readonly element: HTMLElement;
  private rows: SubproblemRow[] = [];
  private rowErrors = new Map<string, string>();
  private busyId: string | null = null;

  constructor(
    private readonly gateway: Gateway,
    private readonly onSelect?: (row: SubproblemRow) => void,
  ) {
    this.element = h("div", { class: "subproblem-panel" });
  }

  async refresh(): Promise<void> {
    this.rows = await this.gateway.subproblems();
    this.render();
  }

  private async toggle(row: SubproblemRow): Promise<void> {
    if (this.busyId) return;
    this.busyId = row.id;
    this.rowErrors.delete(row.id);
    try {
      await this.gateway.setSubproblemActive(row.id, !row.active);
    } catch (err) {
      if (err instanceof ApiError) {
        this.rowErrors.set(row.id, err.message);
      } else {
        this.rowErrors.set(row.id, err instanceof Error ? err.message : String(err));
      }
    } finally {
      this.busyId = null;
      // Re-read either way: on conflict the row was stale, on success the
      // gateway's answer is the truth worth showing.
      await this.refresh();
    }
  }

  private render(): void {
    if (this.rows.length === 0) {
      swap(
        this.element,
        h("p", { class: "empty-state", text: "No sub-problems yet — run the problems stage." }),
      );
      return;
    }
    swap(
      this.element,
      this.rows.map((row) => {
        const error = this.rowErrors.get(row.id);
        return h(
          "div",
          { class: row.active ? "sp-row" : "sp-row sp-muted", dataset: { id: row.id } },
          h(
            "div",
            { class: "sp-title" },
            this.onSelect
              ? h("a", {
                  href: "#",
                  text: row.title,
                  onClick: (e) => {
                    e.preventDefault();
                    this.onSelect?.(row);
                  },
                })
              : row.title,
            h("span", {
              class: "entities",
              text:
                row.affected_entities.length > 0
                  ? `Affects: ${row.affected_entities.join(", ")}`
                  : "",
            }),
          ),
          h("div", { class: "elo-rating", text: formatRating(row.rating) }),
          h("button", {
            class: "sp-toggle",
            text: row.active ? "Deactivate" : "Activate",
            disabled: this.busyId !== null,
            onClick: () => void this.toggle(row),
          }),
          error ? h("span", { class: "row-error", text: error }) : null,
        );
      }),
    );
  }
}
