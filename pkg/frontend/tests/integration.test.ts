/** End-to-end: the real UI classes in jsdom against a live gateway process.
 *
 * A throwaway project is built with the CLI at desk scale, served by
 * `synthkit serve`, and driven through real fetch. Setup opens the voting
 * tournament by POSTing to the gateway directly — that endpoint is
 * facilitator plumbing, not something the UI calls.
 */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, expect, test, vi } from "vitest";

import { Gateway, ProjectSummary, SolutionRow, TournamentSummary } from "../src/api.js";
import { formatRating } from "../src/format.js";
import { GenerationBrowser } from "../src/generations.js";
import { renderedEdges } from "../src/lineage.js";
import { SubproblemPanel } from "../src/subproblems.js";
import { VotingView } from "../src/voting.js";

const PORT = 8901 + (process.pid % 97);
const BASE = `http://127.0.0.1:${PORT}`;
const PROJECT_ID = "proj-web";
const STATEMENT = "Strengthening democratic governance worldwide";

const SMALL_SCALE = [
  "subproblem_count=2",
  'research.categories=["general"]',
  "research.queries_per_category=2",
  "research.top_queries_to_search=2",
  "research.results_per_query=4",
  "research.query_tournament.rounds=2",
  "research.query_tournament.min_games_per_item=1",
  "evolution.population_size=6",
  "evolution.generations=2",
  "evolution.immigration_per_generation=1",
  "evolution.tournament.rounds=3",
  "evolution.tournament.min_games_per_item=2",
  "policy.policies_per_subproblem=3",
  "policy.generations=1",
  'policy.evidence_categories=["Policy Risks","Case Studies"]',
  "policy.evidence_queries_per_category=2",
  "policy.evidence_results_per_query=3",
];

let workdir: string;
let server: ChildProcess | undefined;
let serverLog = "";
let gateway: Gateway;
let tournamentId: string;
let votingSubproblem: string;

function cli(args: string[]): string {
  return execFileSync("synthkit", ["--project", workdir, "--offline", ...args], {
    encoding: "utf-8",
    timeout: 110_000,
  });
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitForGateway(): Promise<void> {
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/projects/${PROJECT_ID}`);
      if (response.ok) return;
    } catch {
      /* not listening yet */
    }
    if (Date.now() > deadline) {
      throw new Error(`gateway never came up on ${BASE}\n${serverLog}`);
    }
    await sleep(200);
  }
}

async function projectSummary(): Promise<ProjectSummary> {
  const response = await fetch(`${BASE}/projects/${PROJECT_ID}`);
  expect(response.ok).toBe(true);
  return (await response.json()) as ProjectSummary;
}

function tournamentIn(summary: ProjectSummary): TournamentSummary {
  const found = summary.tournaments.find((t) => t.id === tournamentId);
  expect(found, `tournament ${tournamentId} in project summary`).toBeTruthy();
  return found as TournamentSummary;
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "synthkit-web-"));
  const sets = SMALL_SCALE.flatMap((value) => ["--set", value]);
  cli(["init", STATEMENT, "--project-id", PROJECT_ID, ...sets]);
  cli(["run", "--stage", "problems"]);
  cli(["run", "--stage", "solutions"]);

  server = spawn(
    "synthkit",
    ["--project", workdir, "--offline", "serve", "--host", "127.0.0.1", "--port", String(PORT)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  server.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  await waitForGateway();

  gateway = new Gateway(BASE, PROJECT_ID);

  // Open the voting tournament over the newest generation of the first
  // evolved sub-problem. Facilitator setup, done directly against the API.
  const rows = await gateway.subproblems();
  const evolved = rows.find((r) => r.active && r.generations.length > 0);
  expect(evolved, "an active sub-problem with recorded generations").toBeTruthy();
  votingSubproblem = (evolved as { id: string }).id;
  const created = await fetch(`${BASE}/projects/${PROJECT_ID}/tournaments`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ kind: "solution", subproblem_id: votingSubproblem, rounds: 8 }),
  });
  expect(created.status).toBe(201);
  const summary = (await created.json()) as TournamentSummary;
  tournamentId = summary.id;
  expect(summary.total_pairs).toBeGreaterThanOrEqual(12);
});

afterAll(async () => {
  if (server) {
    server.kill();
    await new Promise((resolve) => server?.once("exit", resolve));
  }
  rmSync(workdir, { recursive: true, force: true });
});

test("ten votes cast through the UI are persisted and move the ratings", async () => {
  const before = await gateway.solutions(votingSubproblem);
  const gamesBefore = before.reduce((n, row) => n + row.games_played, 0);

  const view = new VotingView(gateway, tournamentId, "tester-ui");
  document.body.append(view.element);
  await view.start();

  for (let i = 1; i <= 10; i++) {
    const left = view.element.querySelector(
      'button[data-choice="One"]:not([disabled])',
    ) as HTMLButtonElement;
    expect(left, `enabled vote button before vote ${i}`).toBeTruthy();
    left.click();
    await vi.waitFor(
      () =>
        expect(view.element.querySelector(".vote-count")?.textContent).toContain(
          `your votes: ${i}`,
        ),
      { timeout: 15_000 },
    );
  }

  // The gateway counted all ten as comparisons on this tournament.
  const t = tournamentIn(await projectSummary());
  expect(t.votes_cast).toBe(10);
  expect(t.open_pairs).toBe(t.total_pairs - 10);

  // Ratings moved: ten games added two plays each, and the rating vector changed.
  const after = await gateway.solutions(votingSubproblem);
  const gamesAfter = after.reduce((n, row) => n + row.games_played, 0);
  expect(gamesAfter).toBe(gamesBefore + 20);
  const ratingById = new Map(before.map((row) => [row.id, row.rating]));
  expect(after.some((row) => row.rating !== ratingById.get(row.id))).toBe(true);

  // The cards on screen show the gateway's current numbers verbatim.
  const byId = new Map<string, SolutionRow>(after.map((row) => [row.id, row]));
  const cards = [...view.element.querySelectorAll(".vote-card")];
  expect(cards).toHaveLength(2);
  for (const card of cards) {
    const row = byId.get((card as HTMLElement).dataset.id ?? "");
    expect(row).toBeTruthy();
    expect(card.querySelector(".elo-rating")?.textContent).toBe(
      `Elo Rating: ${formatRating((row as SolutionRow).rating)} · ${(row as SolutionRow).games_played} games`,
    );
  }
  view.element.remove();
});

test("a double-click casts exactly one vote", async () => {
  const castBefore = tournamentIn(await projectSummary()).votes_cast;

  const view = new VotingView(gateway, tournamentId, "tester-dbl");
  document.body.append(view.element);
  await view.start();

  const left = view.element.querySelector('button[data-choice="One"]') as HTMLButtonElement;
  left.click();
  left.click();
  await vi.waitFor(
    () =>
      expect(view.element.querySelector(".vote-count")?.textContent).toContain(
        "your votes: 1",
      ),
    { timeout: 15_000 },
  );
  await vi.waitFor(
    () =>
      expect(
        view.element.querySelector(".vote-buttons button:not([disabled])"),
      ).toBeTruthy(),
    { timeout: 15_000 },
  );

  expect(view.element.querySelector(".vote-error")).toBeNull();
  expect(tournamentIn(await projectSummary()).votes_cast).toBe(castBefore + 1);
  view.element.remove();
});

test("every vote is on disk as a comparison record", async () => {
  const out = join(workdir, "export.json");
  cli(["export", "--out", out]);
  const doc = JSON.parse(readFileSync(out, "utf-8")) as {
    tournaments: { tournament_id: string; comparisons: { comparison: Record<string, string> }[] }[];
  };
  const exported = doc.tournaments.find((t) => t.tournament_id === tournamentId);
  expect(exported).toBeTruthy();
  const comparisons = (exported as { comparisons: { comparison: Record<string, string> }[] }).comparisons;
  expect(comparisons).toHaveLength(11);
  for (const row of comparisons) {
    expect(row.comparison.tournament_id).toBe(tournamentId);
    expect(row.comparison.voter_kind).toBe("human");
    expect(["tester-ui", "tester-dbl"]).toContain(row.comparison.voter_id);
  }
});

test("the generation browser mirrors the recorded generations and lineage", async () => {
  const rows = await gateway.subproblems();
  const sp = rows.find((r) => r.id === votingSubproblem);
  expect(sp).toBeTruthy();
  const subproblem = sp as NonNullable<typeof sp>;

  const browser = new GenerationBrowser(gateway, subproblem);
  document.body.append(browser.element);
  await browser.start();

  const tabs = [...browser.element.querySelectorAll(".gen-tab")];
  expect(tabs).toHaveLength(subproblem.generations.length);
  expect(tabs.map((tab) => tab.textContent)).toEqual(
    subproblem.generations.map((g) => `Generation ${g}`),
  );

  const lastGeneration = subproblem.generations[subproblem.generations.length - 1] as number;
  const expected = await gateway.solutions(subproblem.id, lastGeneration);
  const cards = [...browser.element.querySelectorAll(".solution-card")];
  expect(cards).toHaveLength(expected.length);
  for (const card of cards) {
    expect(card.querySelectorAll(".card-pros li")).toHaveLength(3);
    expect(card.querySelectorAll(".card-cons li")).toHaveLength(3);
  }

  // The drawn tree is exactly the exported edge set.
  const lineage = await gateway.lineage(subproblem.id);
  const drawn = renderedEdges(browser.element.querySelector(".lineage-tree") as HTMLElement);
  const key = (e: { from: string; to: string }) => `${e.from}->${e.to}`;
  expect(drawn.map(key).sort()).toEqual(lineage.edges.map(key).sort());
  expect(drawn).toHaveLength(lineage.edges.length);

  // A fresh browser over a fresh read renders the identical view.
  const again = new GenerationBrowser(gateway, subproblem);
  await again.start();
  expect(again.element.innerHTML).toBe(browser.element.innerHTML);
  browser.element.remove();
});

test("sub-problem toggles persist, and a stale toggle heals with an inline error", async () => {
  const panel = new SubproblemPanel(gateway);
  document.body.append(panel.element);
  await panel.refresh();

  const dormant = (await gateway.subproblems()).find((r) => !r.active);
  expect(dormant, "an inactive sub-problem to exercise").toBeTruthy();
  const id = (dormant as { id: string }).id;
  const row = () => panel.element.querySelector(`[data-id="${id}"]`) as HTMLElement;

  // Activate through the UI and confirm the gateway agrees.
  expect(row().className).toContain("sp-muted");
  (row().querySelector(".sp-toggle") as HTMLButtonElement).click();
  await vi.waitFor(
    () => expect(row().className).not.toContain("sp-muted"),
    { timeout: 15_000 },
  );
  const liveRow = (await gateway.subproblems()).find((r) => r.id === id);
  expect(liveRow?.active).toBe(true);

  // Deactivate it behind the panel's back; the panel's row is now stale.
  const behind = await fetch(`${BASE}/projects/${PROJECT_ID}/subproblems/${id}/deactivate`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ active: false }),
  });
  expect(behind.ok).toBe(true);

  // The stale toggle (it still says "Deactivate") conflicts, surfaces the
  // error inline, and the re-read row shows the server's state.
  (row().querySelector(".sp-toggle") as HTMLButtonElement).click();
  await vi.waitFor(
    () => expect(row().querySelector(".row-error")).toBeTruthy(),
    { timeout: 15_000 },
  );
  expect(row().querySelector(".row-error")?.textContent).toContain("already inactive");
  expect(row().className).toContain("sp-muted");
  panel.element.remove();
});
