/** Side-by-side pairwise voting against one open tournament.
 *
 * Each vote posts to the gateway and renders the pair the server returns;
 * the running count ("your votes") is the server's number, never a local
 * tally. A vote conflict (someone else already took the pair, or the
 * tournament closed under us) advances to the next pair without fuss.
 * While a vote is in flight the buttons are disabled, so a double-click
 * cannot submit the same pair twice.
 */

import { ApiError, Gateway, ItemCard, NextPair, Outcome } from "./api.js";
import { Attrs, h, swap } from "./dom.js";
import { formatRating, pairProgress } from "./format.js";

const OUTCOMES: { outcome: Outcome; label: string }[] = [
  { outcome: "One", label: "Left is better" },
  { outcome: "Neither", label: "Neither" },
  { outcome: "Two", label: "Right is better" },
];

function randomVoter(): string {
  return `voter-${Math.random().toString(36).slice(2, 10)}`;
}

export class VotingView {
  readonly element: HTMLElement;
  readonly voter: string;
  private payload: NextPair | null = null;
  private voterVotes = 0;
  private busy = false;
  private lastError: string | null = null;

  constructor(
    private readonly gateway: Gateway,
    private readonly tournamentId: string,
    voter?: string,
  ) {
    this.voter = voter ?? randomVoter();
    this.element = h("div", { class: "voting-view" });
  }

  async start(): Promise<void> {
    this.payload = await this.gateway.nextPair(this.tournamentId);
    this.render();
  }

  private card(item: ItemCard): HTMLElement {
    return h(
      "div",
      { class: "vote-card", dataset: { id: item.id } },
      h("h3", { text: item.title }),
      h("div", {
        class: "elo-rating",
        text: `Elo Rating: ${formatRating(item.rating)} · ${item.games_played} games`,
      }),
      h("p", { text: item.description }),
    );
  }

  private async choose(outcome: Outcome): Promise<void> {
    if (this.busy || !this.payload?.pair) return;
    this.busy = true;
    this.lastError = null;
    this.render();
    const pairIndex = this.payload.pair.pair_index;
    try {
      const result = await this.gateway.vote(this.tournamentId, pairIndex, outcome, this.voter);
      this.voterVotes = result.voter_votes;
      this.payload = result.next;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Pair taken by another voter or tournament closed: just move on.
        this.payload = await this.gateway.nextPair(this.tournamentId);
      } else {
        this.lastError = err instanceof Error ? err.message : String(err);
      }
    } finally {
      this.busy = false;
      this.render();
    }
  }

  private render(): void {
    const payload = this.payload;
    if (!payload) return;
    const children: (HTMLElement | null)[] = [
      h("div", {
        class: "vote-count",
        text: `${pairProgress(payload.votes_cast, payload.total_pairs)} · your votes: ${this.voterVotes}`,
      }),
    ];
    if (payload.pair) {
      const pair = payload.pair;
      children.push(
        h("div", { class: "vote-pair" }, this.card(pair.one), this.card(pair.two)),
        h(
          "div",
          { class: "vote-buttons" },
          OUTCOMES.map(({ outcome, label }) =>
            h("button", {
              text: label,
              disabled: this.busy,
              dataset: { choice: outcome },
              onClick: () => void this.choose(outcome),
            } as Attrs),
          ),
        ),
      );
    } else {
      children.push(
        h("p", {
          class: "vote-complete",
          text: payload.open ? "No open pairs right now." : "Tournament complete — thanks for voting!",
        }),
      );
    }
    if (this.lastError) {
      children.push(
        h(
          "div",
          { class: "vote-error" },
          `Vote failed: ${this.lastError}`,
          h("button", { text: "Retry", onClick: () => void this.refresh() }),
        ),
      );
    }
    swap(this.element, children);
  }

  /** Re-read the tournament state without casting anything. */
  async refresh(): Promise<void> {
    this.lastError = null;
    this.payload = await this.gateway.nextPair(this.tournamentId);
    this.render();
  }
}
