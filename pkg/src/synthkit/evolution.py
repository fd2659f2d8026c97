"""Genetic refinement of candidate solutions.

Populations of solutions are improved generation by generation: the fittest
members (by tournament rating) survive unchanged, new candidates are drafted
by crossing over and mutating rating-weighted parents, clearly infeasible or
duplicated entrants are pruned, and a trickle of immigrants keeps diversity
up. Every generation is persisted as a report, so runs resume at generation
boundaries, and all parentage is kept for the lineage tree.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

from . import prompts
from .config import MUTATION_RATES, EvolutionConfig
from .model import (
    ORIGIN_CROSSOVER,
    ORIGIN_MUTATION,
    ORIGIN_SEEDED,
    ORIGIN_WEB,
    GenerationReport,
    ModelError,
    Solution,
    assert_lineage_acyclic,
    lineage_edges,
)
from .orchestrator import AgentNode, NodeError, run_node
from .ranking import model_pair_voter, run_tournament, sorted_by_rating
from .research import dedupe
from .util import derive_rng, jaccard, token_set

log = logging.getLogger(__name__)

REPORT_KIND = "solution"

# Death reasons recorded in generation reports.
DEATH_NONVIABLE = "nonviable"
DEATH_CROSSOVER_REJECTED = "crossover_rejected"
DEATH_DUPLICATE = "duplicate"
DEATH_OUTCOMPETED = "outcompeted"

_PAD_ROUNDS = 6  # bounded attempts to refill a short generation


class EvolutionError(RuntimeError):
    pass


def solution_payload_fields(payload: dict) -> Optional[dict]:
    """Validate the four-field solution schema; None when unusable."""
    if not isinstance(payload, dict):
        return None
    title = str(payload.get("title", "")).strip()
    description = str(payload.get("description", "")).strip()
    if not title or not description:
        return None
    return {
        "title": title,
        "description": description,
        "main_benefit": str(payload.get("mainBenefitOfSolution", "")).strip(),
        "main_obstacle": str(payload.get("mainObstacleToSolutionAdoption", "")).strip(),
    }


def softmax_pick(ranked: Sequence, ratings: dict, rng, k: int, temperature: float) -> list:
    """Sample k distinct items, probability rising exponentially with rating.

    Ratings are temperature-scaled and shifted by the maximum so weights stay
    in a safe numeric range regardless of the rating scale.
    """
    if k > len(ranked):
        raise EvolutionError("not enough members to pick parents from")
    top = max(ratings.get(m.id, m.elo.rating) for m in ranked)
    pool = list(ranked)
    weights = [
        math.exp((ratings.get(m.id, m.elo.rating) - top) / temperature) for m in pool
    ]
    picked = []
    for _ in range(k):
        total = sum(weights)
        x = rng.random() * total
        acc = 0.0
        index = len(pool) - 1
        for j, w in enumerate(weights):
            acc += w
            if x <= acc:
                index = j
                break
        picked.append(pool.pop(index))
        weights.pop(index)
    return picked


class SolutionEvolver:
    """Runs the generational loop for one sub-problem."""

    def __init__(self, hub, store, subproblem, seed: int = 0, config=None, project_config=None):
        self.hub = hub
        self.store = store
        self.sp = subproblem
        project = project_config or store.config()
        self.config: EvolutionConfig = config or project.evolution
        self.elo_config = project.elo
        self.dedupe_threshold = project.research.dedupe_threshold
        self.seed = seed
        self.warnings: list[str] = []

    # ------------------------------------------------------------- seeding

    def seed_population(self, seed_solutions: Sequence[dict] = ()) -> GenerationReport:
        """Record generation 0 from viable research output plus given seeds.

        seed_solutions entries use the four-field solution schema; they are
        persisted with origin "seeded" before selection. Selection takes the
        top population_size candidates by their current rating.
        """
        if self._report(0) is not None:
            raise EvolutionError(f"{self.sp.id} already has a seeded population")
        for payload in seed_solutions:
            fields = solution_payload_fields(payload)
            if fields is None:
                raise EvolutionError(f"seed solution is missing title/description: {payload}")
            self.store.new_solution(
                subproblem_id=self.sp.id,
                origin=ORIGIN_SEEDED,
                generation_index=0,
                **fields,
            )
        candidates = [
            s
            for s in self.store.solutions(subproblem_id=self.sp.id)
            if s.viable and s.origin in (ORIGIN_WEB, ORIGIN_SEEDED)
        ]
        if len(candidates) < 2:
            raise EvolutionError(
                f"need at least 2 viable candidate solutions to seed {self.sp.id};"
                f" have {len(candidates)}"
            )
        members = sorted_by_rating(candidates)[: self.config.population_size]
        if len(members) < self.config.population_size:
            self._warn(
                f"seed population for {self.sp.id} has {len(members)} members;"
                f" configured size is {self.config.population_size}"
            )
        self._apply_pros_cons(members)
        report = GenerationReport(
            kind=REPORT_KIND,
            subproblem_id=self.sp.id,
            index=0,
            member_ids=[m.id for m in members],
            ratings={m.id: m.elo.rating for m in members},
        )
        self.store.record_generation(report)
        return report

    # ------------------------------------------------------- genetic operators

    def crossover(self, parent_a: Solution, parent_b: Solution, generation_index: int):
        """Merge two distinct parents into a persisted child, or None when the
        model output stays schema-invalid after a re-ask."""
        if parent_a.id == parent_b.id:
            raise EvolutionError("crossover needs two distinct parents")
        payload = self._draft_payload(("crossover", (parent_a, parent_b)))
        return self._persist_child(payload, "crossover", (parent_a, parent_b), generation_index)

    def mutate(
        self,
        parent: Solution,
        generation_index: int,
        rate_tier: Optional[str] = None,
    ):
        tier = rate_tier or self.config.mutation_rate
        if tier not in MUTATION_RATES:
            raise EvolutionError(f"unknown mutation rate tier: {tier}")
        payload = self._draft_payload(("mutation", (parent,)), rate_tier=tier)
        return self._persist_child(payload, "mutation", (parent,), generation_index)

    def generate_pros_cons(self, solution: Solution, n_each: Optional[int] = None) -> Solution:
        n = self.config.pros_cons_each if n_each is None else n_each
        if n < 1:
            raise EvolutionError("n_each must be at least 1")
        pros, cons = self._pros_cons_payload(solution, n)
        fresh = self.store.get_solution(solution.id)
        fresh.pros = pros
        fresh.cons = cons
        self.store.update_solution(fresh)
        return self.store.get_solution(solution.id)

    def _pros_cons_payload(self, solution: Solution, n: int) -> tuple[list[str], list[str]]:
        node = AgentNode(name="pros-cons", template="pros_cons", output_schema="json_object")
        payload = run_node(
            self.hub,
            node,
            {"n_each": str(n), "problem": self.sp.text(), "solution": solution.text()},
        )
        pros = [str(p).strip() for p in payload.get("pros", []) if str(p).strip()]
        cons = [str(c).strip() for c in payload.get("cons", []) if str(c).strip()]
        if len(pros) < n or len(cons) < n:
            raise EvolutionError(
                f"model returned {len(pros)} pros / {len(cons)} cons for"
                f" {solution.id}; need {n} of each"
            )
        return pros[:n], cons[:n]

    def _apply_pros_cons(self, solutions: Sequence[Solution]) -> None:
        """Concurrent drafting, sequential canonical-order persistence."""
        n = self.config.pros_cons_each
        payloads = self.hub.map(lambda s: self._pros_cons_payload(s, n), list(solutions))
        for sol, (pros, cons) in zip(solutions, payloads):
            fresh = self.store.get_solution(sol.id)
            fresh.pros = pros
            fresh.cons = cons
            self.store.update_solution(fresh)

    def _context_slots(self) -> dict:
        return {
            "statement": self.store.statement.text,
            "subproblem": self.sp.text(),
            "entities": prompts.format_entities(self.sp.affected_entities),
        }

    def _draft_payload(self, draft, rate_tier: Optional[str] = None) -> Optional[dict]:
        kind, parents = draft
        slots = self._context_slots()
        if kind == "crossover":
            node = AgentNode(
                name="crossover", template="crossover", tier="deep", output_schema="json_object"
            )
            slots["solution_one_json"] = prompts.solution_json(parents[0])
            slots["solution_two_json"] = prompts.solution_json(parents[1])
        else:
            node = AgentNode(
                name="mutate", template="mutation", tier="deep", output_schema="json_object"
            )
            tier = rate_tier or self.config.mutation_rate
            slots["rate_instruction"] = prompts.MUTATION_RATE_INSTRUCTIONS[tier]
            slots["solution_json"] = prompts.solution_json(parents[0])
        try:
            return run_node(self.hub, node, slots)
        except NodeError as exc:
            self._warn(f"{kind} draft discarded: {exc}")
            return None

    def _persist_child(self, payload, kind: str, parents, generation_index: int):
        if payload is None:
            return None
        fields = solution_payload_fields(payload)
        if fields is None:
            self._warn(f"{kind} child discarded: missing title/description")
            return None
        origin = ORIGIN_CROSSOVER if kind == "crossover" else ORIGIN_MUTATION
        try:
            return self.store.new_solution(
                subproblem_id=self.sp.id,
                origin=origin,
                generation_index=generation_index,
                parent_ids=[p.id for p in parents],
                **fields,
            )
        except ModelError as exc:
            self._warn(f"{kind} child discarded: {exc}")
            return None

    # ---------------------------------------------------------- generation loop

    def evolve_generation(self, generation_index: int) -> GenerationReport:
        """Produce generation generation_index + 1 and its report."""
        report_n = self._report(generation_index)
        if report_n is None:
            raise EvolutionError(
                f"{self.sp.id} has no generation {generation_index} to evolve from"
            )
        members_n = [self.store.get_solution(i) for i in report_n.member_ids]
        if len(members_n) < 2:
            raise EvolutionError(
                f"population collapsed below 2 members for {self.sp.id}"
            )
        cfg = self.config
        next_index = generation_index + 1
        ratings_in = dict(report_n.ratings)

        elite_count = min(
            len(members_n), max(1, math.ceil(cfg.elite_fraction * cfg.population_size))
        )
        ranked_in = sorted(
            members_n, key=lambda m: (-ratings_in.get(m.id, m.elo.rating), m.id)
        )
        elites = ranked_in[:elite_count]
        elite_ids = {e.id for e in elites}

        # Draft offspring. Crossover wins a slot with probability
        # crossover_fraction, otherwise the slot mutates a parent with the
        # tier's probability or carries the parent forward unchanged.
        offspring_target = max(
            0, cfg.population_size - elite_count - cfg.immigration_per_generation
        )
        drafts = []
        for i in range(offspring_target):
            rng = derive_rng(self.seed, "offspring", self.sp.id, next_index, i)
            if rng.random() < cfg.crossover_fraction:
                pa, pb = self._softmax_pick(ranked_in, ratings_in, rng, k=2)
                drafts.append(("crossover", (pa, pb)))
            elif rng.random() < MUTATION_RATES[cfg.mutation_rate]:
                (parent,) = self._softmax_pick(ranked_in, ratings_in, rng, k=1)
                drafts.append(("mutation", (parent,)))
            # else: carryover; the parent already competes as a member.

        payloads = self.hub.map(self._draft_payload, drafts)
        children = []
        for draft, payload in zip(drafts, payloads):
            child = self._persist_child(payload, draft[0], draft[1], next_index)
            if child is not None:
                children.append(child)

        past_member_ids = self._all_member_ids()
        exclude = past_member_ids | {c.id for c in children}
        immigrants = self._draw_immigrants(
            cfg.immigration_per_generation, next_index, exclude
        )

        deaths: list[dict] = []
        newcomers = children + [s for s in immigrants if s.generation_index == next_index]
        viable_new = self._prune_nonviable(newcomers, deaths)
        viable_ids = {s.id for s in viable_new}
        children = [c for c in children if c.id in viable_ids]
        immigrants = [
            s
            for s in immigrants
            if s.generation_index != next_index or s.id in viable_ids
        ]

        pool = list({s.id: s for s in members_n + children + immigrants}.values())
        self._run_admission_tournament(pool, next_index)

        # Adoption rule: a merged child must beat its weaker parent.
        ratings_now = {s.id: s.elo.rating for s in pool}
        rejected = set()
        for child in children:
            if child.origin != ORIGIN_CROSSOVER:
                continue
            weaker = min(ratings_now[p] for p in child.parent_ids)
            if ratings_now[child.id] <= weaker:
                rejected.add(child.id)
                deaths.append({"id": child.id, "reason": DEATH_CROSSOVER_REJECTED})
        pool = [s for s in pool if s.id not in rejected]

        pool = self._dedupe_pool(pool, elite_ids, deaths)

        ranked_pool = sorted(pool, key=lambda s: (-s.elo.rating, s.id))
        members_next = [s for s in ranked_pool if s.id in elite_ids]
        for sol in ranked_pool:
            if len(members_next) >= cfg.population_size:
                break
            if sol.id not in elite_ids:
                members_next.append(sol)
        for sol in ranked_pool:
            if sol.id not in {m.id for m in members_next}:
                deaths.append({"id": sol.id, "reason": DEATH_OUTCOMPETED})

        members_next = self._pad_population(
            members_next, next_index, past_member_ids, deaths
        )
        members_next.sort(key=lambda s: (-s.elo.rating, s.id))

        new_member_ids = [m.id for m in members_next if m.id not in set(report_n.member_ids)]
        self._apply_pros_cons([self.store.get_solution(i) for i in new_member_ids])
        members_next = [self.store.get_solution(m.id) for m in members_next]

        births = {"crossover": 0, "mutation": 0, "immigration": 0}
        child_ids = {c.id: c.origin for c in children}
        for member_id in new_member_ids:
            if member_id in child_ids:
                key = "crossover" if child_ids[member_id] == ORIGIN_CROSSOVER else "mutation"
            else:
                key = "immigration"
            births[key] += 1

        report = GenerationReport(
            kind=REPORT_KIND,
            subproblem_id=self.sp.id,
            index=next_index,
            member_ids=[m.id for m in members_next],
            ratings={m.id: m.elo.rating for m in members_next},
            births=births,
            deaths=deaths,
        )
        self.store.record_generation(report)
        return report

    def run(self, generations: Optional[int] = None, on_generation=None):
        """Evolve up to the requested generation, skipping recorded ones.

        Returns (final members sorted by rating, reports for generations 1..G).
        Requires a seeded generation 0; generations=0 returns the seed
        population unchanged.
        """
        total = self.config.generations if generations is None else generations
        if total < 0:
            raise EvolutionError("generations cannot be negative")
        if self._report(0) is None:
            raise EvolutionError(f"seed a population for {self.sp.id} first")
        reports = []
        for g in range(1, total + 1):
            existing = self._report(g)
            if existing is not None:
                reports.append(existing)
                continue
            report = self.evolve_generation(g - 1)
            reports.append(report)
            self.store.flush()
            if on_generation is not None:
                on_generation(report)
        final = sorted_by_rating(self.members(total))
        return final, reports

    def members(self, index: int) -> list[Solution]:
        report = self._report(index)
        if report is None:
            raise EvolutionError(f"no generation {index} recorded for {self.sp.id}")
        return [self.store.get_solution(i) for i in report.member_ids]

    # ------------------------------------------------------------- internals

    def _report(self, index: int) -> Optional[GenerationReport]:
        for rep in self.store.generation_reports(REPORT_KIND, self.sp.id):
            if rep.index == index:
                return rep
        return None

    def _all_member_ids(self) -> set[str]:
        ids: set[str] = set()
        for rep in self.store.generation_reports(REPORT_KIND, self.sp.id):
            ids.update(rep.member_ids)
        return ids

    def _softmax_pick(self, ranked, ratings, rng, k: int) -> list[Solution]:
        return softmax_pick(ranked, ratings, rng, k, self.config.selection_temperature)

    def _prune_nonviable(self, newcomers, deaths) -> list[Solution]:
        if not newcomers or not self.config.prune_nonviable:
            return list(newcomers)
        node = AgentNode(name="viability", template="viability", output_schema="yes_no")
        verdicts = self.hub.map(
            lambda s: run_node(
                self.hub, node, {"problem": self.sp.text(), "solution": s.text()}
            ),
            list(newcomers),
        )
        survivors = []
        for sol, verdict in zip(newcomers, verdicts):
            if verdict == "No":
                fresh = self.store.get_solution(sol.id)
                fresh.viable = False
                self.store.update_solution(fresh)
                deaths.append({"id": sol.id, "reason": DEATH_NONVIABLE})
            else:
                survivors.append(self.store.get_solution(sol.id))
        return survivors

    def _run_admission_tournament(self, pool, next_index: int) -> None:
        voter = model_pair_voter(
            self.hub,
            "pairwise_solution",
            lambda a, b: {
                "interest_instruction": self.store.statement.ranking_guidance
                or prompts.DEFAULT_INTEREST_INSTRUCTION,
                "problem": self.sp.text(),
                "component_one": a.text(),
                "pro_one": prompts.top_pro(a),
                "con_one": prompts.top_con(a),
                "component_two": b.text(),
                "pro_two": prompts.top_pro(b),
                "con_two": prompts.top_con(b),
            },
        )
        tournament_id = f"evo-{self.sp.id}-g{next_index}"
        self.store.open_tournament(
            {
                "id": tournament_id,
                "kind": "solution",
                "item_ids": [s.id for s in pool],
                "open": True,
                "voter_kind": "model",
            }
        )
        run_tournament(
            pool,
            self.config.tournament,
            voter,
            config=self.elo_config,
            rng=derive_rng(self.seed, "evo-tournament", self.sp.id, next_index),
            tournament_id=tournament_id,
            voter_kind="model",
            recorder=lambda c, a, b: self.store.record_comparison(c, [a, b]),
        )
        self.store.close_tournament(tournament_id)

    def _dedupe_pool(self, pool, elite_ids, deaths) -> list[Solution]:
        """Drop near-duplicates; elites always survive their cluster."""
        report = dedupe(pool, self.dedupe_threshold)
        keep: set[str] = set()
        for cluster, survivor in zip(report.clusters, report.survivors):
            cluster_elites = [i for i in cluster if i in elite_ids]
            chosen = set(cluster_elites) if cluster_elites else {survivor}
            keep.update(chosen)
            for member_id in cluster:
                if member_id not in chosen:
                    fresh = self.store.get_solution(member_id)
                    fresh.viable = False
                    self.store.update_solution(fresh)
                    deaths.append({"id": member_id, "reason": DEATH_DUPLICATE})
        return [self.store.get_solution(s.id) for s in pool if s.id in keep]

    def _draw_immigrants(self, count: int, next_index: int, exclude: set[str]):
        """Fill count slots from unused viable web-sourced rows, then from
        freshly drafted candidates."""
        if count <= 0:
            return []
        reserve = [
            s
            for s in self.store.solutions(subproblem_id=self.sp.id)
            if s.viable and s.origin == ORIGIN_WEB and s.id not in exclude
            and s.generation_index < next_index
        ]
        reserve.sort(key=lambda s: (-s.elo.rating, s.id))
        immigrants = reserve[:count]
        short = count - len(immigrants)
        if short > 0:
            immigrants.extend(self._fresh_candidates(short, next_index))
        return immigrants

    def _fresh_candidates(self, count: int, next_index: int) -> list[Solution]:
        node = AgentNode(
            name="fresh", template="fresh_solutions", tier="deep", output_schema="json_array"
        )
        existing_titles = sorted(
            {s.title for s in self.store.solutions(subproblem_id=self.sp.id)}
        )
        rows = run_node(
            self.hub,
            node,
            {
                "problem": self.sp.text(),
                "existing_titles": "\n".join(f"- {t}" for t in existing_titles) or "(none)",
                "n": str(count),
            },
        )
        created = []
        for payload in rows[:count]:
            fields = solution_payload_fields(payload)
            if fields is None:
                self._warn("fresh candidate discarded: missing title/description")
                continue
            created.append(
                self.store.new_solution(
                    subproblem_id=self.sp.id,
                    origin=ORIGIN_WEB,
                    generation_index=next_index,
                    **fields,
                )
            )
        return created

    def _pad_population(self, members, next_index: int, past_member_ids, deaths):
        """Top the generation back up to population_size with immigrants."""
        cfg = self.config
        member_ids = {m.id for m in members}
        rounds = 0
        while len(members) < cfg.population_size and rounds < _PAD_ROUNDS:
            rounds += 1
            need = cfg.population_size - len(members)
            exclude = past_member_ids | member_ids
            batch = self._draw_immigrants(need, next_index, exclude)
            batch = self._prune_nonviable(
                [s for s in batch if s.generation_index == next_index], deaths
            ) + [s for s in batch if s.generation_index != next_index]
            member_tokens = {m.id: token_set(m.text()) for m in members}
            for candidate in batch:
                if candidate.id in member_ids:
                    continue
                tokens = token_set(candidate.text())
                if any(
                    jaccard(tokens, other) >= self.dedupe_threshold
                    for other in member_tokens.values()
                ):
                    continue
                members.append(candidate)
                member_ids.add(candidate.id)
                member_tokens[candidate.id] = tokens
                if len(members) >= cfg.population_size:
                    break
        if len(members) < cfg.population_size:
            self._warn(
                f"generation {next_index} of {self.sp.id} holds {len(members)}"
                f" members; could not refill to {cfg.population_size}"
            )
        return members

    def _warn(self, message: str) -> None:
        log.warning("%s", message)
        self.warnings.append(message)


def lineage_export(store, subproblem_id: str) -> dict:
    """Evolutionary-tree document for one sub-problem: nodes and parent edges."""
    rows = store.solutions(subproblem_id=subproblem_id)
    assert_lineage_acyclic(rows)
    return {
        "subproblem_id": subproblem_id,
        "nodes": [
            {
                "id": s.id,
                "title": s.title,
                "generation": s.generation_index,
                "origin": s.origin,
                "rating": s.elo.rating,
                "viable": s.viable,
            }
            for s in rows
        ],
        "edges": [{"from": parent, "to": child} for parent, child in lineage_edges(rows)],
    }
