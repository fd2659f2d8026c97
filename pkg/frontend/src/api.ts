/** Typed client for the project gateway.
 *
 * Every view reads through this module and renders payload values verbatim;
 * nothing is recomputed or cached on the client, so reloading the page
 * rebuilds the identical view from gateway reads alone.
 */

export interface ItemCard {
  id: string;
  title: string;
  description: string;
  pros: string[];
  cons: string[];
  rating: number;
  games_played: number;
}

export interface PairView {
  pair_index: number;
  one: ItemCard;
  two: ItemCard;
}

export interface NextPair {
  tournament_id: string;
  open: boolean;
  total_pairs: number;
  votes_cast: number;
  open_pairs: number;
  pair: PairView | null;
}

export type Outcome = "One" | "Two" | "Neither";

export interface VoteResult {
  recorded: boolean;
  pair_index: number;
  outcome: Outcome;
  ratings_after: Record<string, { rating: number; games_played: number }>;
  voter_votes: number;
  next: NextPair;
}

export interface TournamentSummary {
  id: string;
  kind: string;
  voter_kind: string;
  open: boolean;
  items: number;
  total_pairs: number;
  votes_cast: number;
  open_pairs: number;
}

export interface PolicySummary {
  id: string;
  subproblem_id: string;
  title: string;
  rating: number;
  evidence_items: number;
}

export interface ProjectSummary {
  project_id: string;
  statement: { text: string; ranking_guidance: string };
  created_at: string;
  stages_done: Record<string, object>;
  counts: { subproblems: number; solutions: number; policies: number; sources: number };
  tournaments: TournamentSummary[];
  policies: PolicySummary[];
  active_run: string | null;
}

export interface SubproblemRow {
  id: string;
  title: string;
  description: string;
  active: boolean;
  rating: number;
  games_played: number;
  affected_entities: string[];
  generations: number[];
  policy_generations: number[];
}

export interface SolutionRow {
  id: string;
  subproblem_id: string;
  title: string;
  description: string;
  pros: string[];
  cons: string[];
  origin: string;
  generation_index: number;
  viable: boolean;
  parent_ids: string[];
  rating: number;
  games_played: number;
}

export interface LineageNode {
  id: string;
  title: string;
  generation: number;
  origin: string;
  rating: number;
  viable: boolean;
}

export interface LineageEdge {
  from: string;
  to: string;
}

export interface LineageExport {
  subproblem_id: string;
  nodes: LineageNode[];
  edges: LineageEdge[];
}

export interface EvidenceItemView {
  summary: string;
  bullets: string[];
  more_count: number;
  source: { url: string; title: string };
}

export interface EvidenceExport {
  policy_id: string;
  title: string;
  source_solution_ids: string[];
  categories: { name: string; items: EvidenceItemView[] }[];
}

export interface RunStarted {
  run_id: string;
  stage: string;
  status: string;
}

export interface RunEvent {
  run_id: string;
  stage: string;
  sequence: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface RunEvents {
  run_id: string;
  stage: string;
  status: string;
  last_sequence: number;
  events: RunEvent[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText || `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (body && body.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    /* non-JSON error body; keep the status text */
  }
  return new ApiError(response.status, detail);
}

export class Gateway {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly base: string,
    readonly projectId: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  project(): Promise<ProjectSummary> {
    return this.request(`/projects/${this.projectId}`);
  }

  async subproblems(): Promise<SubproblemRow[]> {
    const doc = await this.request<{ subproblems: SubproblemRow[] }>(
      `/projects/${this.projectId}/subproblems`,
    );
    return doc.subproblems;
  }

  setSubproblemActive(subproblemId: string, active: boolean): Promise<SubproblemRow> {
    return this.post(
      `/projects/${this.projectId}/subproblems/${subproblemId}/deactivate`,
      { active },
    );
  }

  async solutions(subproblemId: string, generation?: number): Promise<SolutionRow[]> {
    const params = new URLSearchParams({ subproblem: subproblemId });
    if (generation !== undefined) params.set("generation", String(generation));
    const doc = await this.request<{ solutions: SolutionRow[] }>(
      `/projects/${this.projectId}/solutions?${params}`,
    );
    return doc.solutions;
  }

  lineage(subproblemId: string): Promise<LineageExport> {
    return this.request(`/projects/${this.projectId}/lineage/${subproblemId}`);
  }

  evidence(policyId: string): Promise<EvidenceExport> {
    return this.request(`/projects/${this.projectId}/policies/${policyId}/evidence`);
  }

  nextPair(tournamentId: string): Promise<NextPair> {
    return this.request(`/tournaments/${tournamentId}/next-pair`);
  }

  vote(
    tournamentId: string,
    pairIndex: number,
    outcome: Outcome,
    voter: string,
  ): Promise<VoteResult> {
    return this.post(`/tournaments/${tournamentId}/votes`, {
      pair_index: pairIndex,
      outcome,
      voter,
    });
  }

  startRun(stage: string, overrides?: Record<string, unknown>): Promise<RunStarted> {
    return this.post(`/projects/${this.projectId}/runs`, {
      stage,
      config_overrides: overrides ?? null,
    });
  }

  runEvents(runId: string, since: number, waitSeconds: number): Promise<RunEvents> {
    return this.request(`/runs/${runId}/events?since=${since}&wait=${waitSeconds}`);
  }
}
