/** Shared test fixtures: a recording fake fetch and payload builders. */

import { FetchLike, ItemCard, NextPair, SolutionRow, SubproblemRow } from "../src/api.js";

export function json(data: unknown, status = 200): Response {
  return new Response(JSON.stringify(data), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export type RouteHandler = (call: RecordedCall) => Response | Promise<Response>;

export interface FakeFetch {
  (url: string, init?: RequestInit): Promise<Response>;
  calls: RecordedCall[];
  posts(): RecordedCall[];
}

/** Fake fetch that records every call and answers from the handler. */
export function fakeFetch(handler: RouteHandler): FakeFetch {
  const calls: RecordedCall[] = [];
  const fn = (async (url: string, init?: RequestInit) => {
    const call: RecordedCall = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? (JSON.parse(String(init.body)) as unknown) : null,
    };
    calls.push(call);
    return handler(call);
  }) as FakeFetch;
  fn.calls = calls;
  fn.posts = () => calls.filter((c) => c.method === "POST");
  return fn;
}

export const asFetch = (fn: FakeFetch): FetchLike => fn;

export function item(id: string, title: string, rating = 1000, games = 0): ItemCard {
  return {
    id,
    title,
    description: `${title} in detail.`,
    pros: [`${title} pro 1`, `${title} pro 2`, `${title} pro 3`],
    cons: [`${title} con 1`, `${title} con 2`, `${title} con 3`],
    rating,
    games_played: games,
  };
}

export function pairPayload(
  pairIndex: number | null,
  one?: ItemCard,
  two?: ItemCard,
  extra: Partial<NextPair> = {},
): NextPair {
  return {
    tournament_id: "ht-001",
    open: true,
    total_pairs: 12,
    votes_cast: 0,
    open_pairs: 12,
    pair:
      pairIndex === null || !one || !two
        ? null
        : { pair_index: pairIndex, one, two },
    ...extra,
  };
}

export function subproblemRow(
  id: string,
  title: string,
  extra: Partial<SubproblemRow> = {},
): SubproblemRow {
  return {
    id,
    title,
    description: `${title}, described.`,
    active: true,
    rating: 1000,
    games_played: 0,
    affected_entities: [],
    generations: [],
    policy_generations: [],
    ...extra,
  };
}

export function solutionRow(
  id: string,
  title: string,
  extra: Partial<SolutionRow> = {},
): SolutionRow {
  return {
    id,
    subproblem_id: "sp-00001",
    title,
    description: `${title} in detail.`,
    pros: [`${title} pro 1`, `${title} pro 2`, `${title} pro 3`],
    cons: [`${title} con 1`, `${title} con 2`, `${title} con 3`],
    origin: "web_sourced",
    generation_index: 0,
    viable: true,
    parent_ids: [],
    rating: 1000,
    games_played: 0,
    ...extra,
  };
}
