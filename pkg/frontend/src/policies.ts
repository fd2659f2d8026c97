/** Policies with expandable evidence dossiers, grouped by category. */

import { EvidenceExport, Gateway, PolicySummary } from "./api.js";
import { h, swap } from "./dom.js";
import { formatRating } from "./format.js";

function evidenceDetail(doc: EvidenceExport): HTMLElement {
  if (doc.categories.length === 0) {
    return h("p", { class: "empty-state", text: "No evidence gathered yet." });
  }
  return h(
    "div",
    { class: "evidence-detail" },
    doc.categories.map((category) =>
      h(
        "div",
        { class: "evidence-category" },
        h("h4", { text: category.name }),
        category.items.map((item) =>
          h(
            "div",
            { class: "evidence-item" },
            h("div", { text: item.summary }),
            h("ul", {}, item.bullets.map((b) => h("li", { text: b }))),
            item.more_count > 0
              ? h("div", { class: "more-count", text: `+${item.more_count} more points` })
              : null,
            h(
              "div",
              { class: "source" },
              "source: ",
              h("a", { href: item.source.url, text: item.source.title || item.source.url }),
            ),
          ),
        ),
      ),
    ),
  );
}

export class PolicyList {
  readonly element: HTMLElement;
  private expanded = new Set<string>();

  constructor(private readonly gateway: Gateway) {
    this.element = h("div", { class: "policy-list" });
  }

  render(policies: PolicySummary[]): void {
    if (policies.length === 0) {
      swap(
        this.element,
        h("p", { class: "empty-state", text: "No policies yet — run the policies stage." }),
      );
      return;
    }
    const ranked = [...policies].sort(
      (a, b) => b.rating - a.rating || a.id.localeCompare(b.id),
    );
    swap(
      this.element,
      ranked.map((policy) => {
        const detail = h("div", { class: "evidence-pane" });
        const row = h(
          "div",
          { class: "policy-row", dataset: { id: policy.id } },
          h(
            "div",
            {
              class: "policy-head",
              onClick: () => void this.toggleDetail(policy.id, detail),
            },
            h("span", { class: "policy-title", text: policy.title }),
            h("span", { class: "elo-rating", text: formatRating(policy.rating) }),
            h("span", { class: "hint", text: `${policy.evidence_items} evidence items` }),
          ),
          detail,
        );
        if (this.expanded.has(policy.id)) void this.loadDetail(policy.id, detail);
        return row;
      }),
    );
  }

  private async toggleDetail(policyId: string, pane: HTMLElement): Promise<void> {
    if (this.expanded.has(policyId)) {
      this.expanded.delete(policyId);
      swap(pane);
      return;
    }
    this.expanded.add(policyId);
    await this.loadDetail(policyId, pane);
  }

  private async loadDetail(policyId: string, pane: HTMLElement): Promise<void> {
    swap(pane, h("p", { class: "loading", text: "Loading evidence…" }));
    try {
      const doc = await this.gateway.evidence(policyId);
      swap(pane, evidenceDetail(doc));
    } catch (err) {
      swap(pane, h("p", {
        class: "row-error",
        text: err instanceof Error ? err.message : String(err),
      }));
    }
  }
}
