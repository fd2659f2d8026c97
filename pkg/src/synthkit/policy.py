"""Turn top-rated solutions into policy proposals, refine them, and attach
categorized supporting evidence gathered from web research.

Policies are drafted by the model from a numbered list of the sub-problem's
best solutions, each proposal citing the solutions it builds on. The drafted
set is then refined with the same generational machinery used for solutions
(rating tournaments, elite survival, crossover/mutation offspring) and each
surviving policy gets an evidence dossier: per-category web research whose
findings are stored with their source citations.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from typing import Optional, Sequence

from . import prompts
from .config import EXPECTED_EVIDENCE_CATEGORY_COUNT, MUTATION_RATES
from .evolution import (
    DEATH_CROSSOVER_REJECTED,
    DEATH_DUPLICATE,
    DEATH_OUTCOMPETED,
    softmax_pick,
    solution_payload_fields,
)
from .model import (
    ORIGIN_CROSSOVER,
    ORIGIN_MUTATION,
    ORIGIN_SEEDED,
    GenerationReport,
    ModelError,
    Policy,
)
from .orchestrator import AgentNode, NodeError, run_node
from .ranking import model_pair_voter, run_tournament, sorted_by_rating
from .research import ResearchEngine, dedupe
from .util import derive_rng

log = logging.getLogger(__name__)

REPORT_KIND = "policy"


class PolicyError(RuntimeError):
    pass


def policy_json(pol: Policy) -> str:
    """Four-field JSON for the drafting templates. Policies carry no
    benefit/obstacle analysis, so those fields stay blank."""
    return json.dumps(
        {
            "title": pol.title,
            "description": pol.description,
            "mainBenefitOfSolution": "",
            "mainObstacleToSolutionAdoption": "",
        },
        indent=2,
        ensure_ascii=False,
    )


class PolicyEngine:
    """Drafts, refines, and evidences policy proposals for one project."""

    def __init__(self, hub, store, research: Optional[ResearchEngine] = None, seed: int = 0, config=None):
        self.hub = hub
        self.store = store
        self.research = research
        self.seed = seed
        project = config or store.config()
        self.config = project.policy
        self.elo_config = project.elo
        self.dedupe_threshold = project.research.dedupe_threshold
        # Policies run the solution GA with a fixed population (the drafted
        # set) and no immigration; there is no reserve to draw newcomers from.
        self.evolution_config = dataclasses.replace(
            project.evolution,
            generations=self.config.generations,
            immigration_per_generation=0,
        )
        self.warnings: list[str] = []

    # ------------------------------------------------------------- drafting

    def solutions_to_policies(self, subproblem, n_policies: Optional[int] = None) -> list[Policy]:
        """Draft n policy proposals from the sub-problem's top solutions.

        Every persisted policy cites at least one source solution; drafts
        that fail the schema or cite nothing are logged and dropped. Only a
        completely empty outcome is an error.
        """
        n = self.config.policies_per_subproblem if n_policies is None else n_policies
        if n < 1:
            raise PolicyError("n_policies must be at least 1")
        top = [
            s
            for s in sorted_by_rating(self.store.solutions(subproblem_id=subproblem.id))
            if s.viable
        ][: self.config.top_solutions_considered]
        if not top:
            raise PolicyError(
                f"{subproblem.id} has no viable solutions to draft policies from"
            )
        numbered = "\n".join(
            f"{i}. {s.title} - {s.description}" for i, s in enumerate(top, start=1)
        )
        node = AgentNode(
            name="draft-policies",
            template="policy_from_solutions",
            tier="deep",
            output_schema="json_array",
        )
        try:
            rows = run_node(
                self.hub,
                node,
                {"problem": subproblem.text(), "numbered_solutions": numbered, "n": str(n)},
            )
        except NodeError as exc:
            raise PolicyError(f"policy drafting failed for {subproblem.id}: {exc}") from exc
        created: list[Policy] = []
        for payload in rows[:n]:
            fields = solution_payload_fields(payload)
            if fields is None:
                self._warn("policy draft discarded: missing title/description")
                continue
            sources = self._cited_solution_ids(payload, top)
            if not sources:
                self._warn(
                    f"policy draft '{fields['title']}' discarded: cites no known solution"
                )
                continue
            created.append(
                self.store.new_policy(
                    subproblem_id=subproblem.id,
                    title=fields["title"],
                    description=fields["description"],
                    source_solution_ids=sources,
                    origin=ORIGIN_SEEDED,
                    generation_index=0,
                )
            )
        if not created:
            raise PolicyError(f"no usable policy drafts for {subproblem.id}")
        return created

    def _cited_solution_ids(self, payload: dict, top: Sequence) -> list[str]:
        """Map 1-based basedOnSolutions indexes onto solution ids."""
        raw = payload.get("basedOnSolutions", [])
        if not isinstance(raw, list):
            return []
        ids = []
        for entry in raw:
            try:
                index = int(entry)
            except (TypeError, ValueError):
                self._warn(f"ignoring non-numeric solution reference: {entry!r}")
                continue
            if 1 <= index <= len(top):
                ids.append(top[index - 1].id)
            else:
                self._warn(f"ignoring out-of-range solution reference: {index}")
        return sorted(set(ids))

    # ------------------------------------------------------------ refinement

    def evolve_policies(self, subproblem, generations: Optional[int] = None):
        """Refine the drafted policies for as many generations as configured.

        Returns (policies of the last generation sorted by rating, reports).
        With fewer than two policies or zero generations the set is returned
        unchanged; recorded generations are never recomputed, so interrupted
        runs pick up at the next generation boundary.
        """
        total = self.evolution_config.generations if generations is None else generations
        if total < 0:
            raise PolicyError("generations cannot be negative")
        policies = self.store.policies(subproblem_id=subproblem.id)
        if not policies:
            raise PolicyError(f"draft policies for {subproblem.id} first")
        if self._report(subproblem.id, 0) is None:
            base = sorted_by_rating(policies)
            self.store.record_generation(
                GenerationReport(
                    kind=REPORT_KIND,
                    subproblem_id=subproblem.id,
                    index=0,
                    member_ids=[p.id for p in base],
                    ratings={p.id: p.elo.rating for p in base},
                )
            )
        if len(self._report(subproblem.id, 0).member_ids) < 2:
            self._warn(
                f"{subproblem.id} has a single policy; skipping refinement"
            )
            return sorted_by_rating(self.store.policies(subproblem_id=subproblem.id)), []
        reports = []
        for g in range(1, total + 1):
            existing = self._report(subproblem.id, g)
            if existing is not None:
                reports.append(existing)
                continue
            reports.append(self._evolve_step(subproblem, g))
            self.store.flush()
        last = self._report(subproblem.id, total)
        members = [self.store.get_policy(i) for i in last.member_ids]
        return sorted_by_rating(members), reports

    def _evolve_step(self, subproblem, next_index: int) -> GenerationReport:
        cfg = self.evolution_config
        report_n = self._report(subproblem.id, next_index - 1)
        members = [self.store.get_policy(i) for i in report_n.member_ids]
        if len(members) < 2:
            raise PolicyError(f"policy population collapsed for {subproblem.id}")
        population_size = max(2, len(self._report(subproblem.id, 0).member_ids))
        ratings_in = dict(report_n.ratings)
        ranked_in = sorted(
            members, key=lambda m: (-ratings_in.get(m.id, m.elo.rating), m.id)
        )
        elite_count = min(
            len(members), max(1, math.ceil(cfg.elite_fraction * population_size))
        )
        elites = ranked_in[:elite_count]
        elite_ids = {e.id for e in elites}

        drafts = []
        for i in range(max(0, population_size - elite_count)):
            rng = derive_rng(self.seed, "policy-offspring", subproblem.id, next_index, i)
            if rng.random() < cfg.crossover_fraction:
                pa, pb = softmax_pick(
                    ranked_in, ratings_in, rng, 2, cfg.selection_temperature
                )
                drafts.append(("crossover", (pa, pb)))
            elif rng.random() < MUTATION_RATES[cfg.mutation_rate]:
                (parent,) = softmax_pick(
                    ranked_in, ratings_in, rng, 1, cfg.selection_temperature
                )
                drafts.append(("mutation", (parent,)))

        payloads = self.hub.map(
            lambda d: self._draft_payload(subproblem, d), drafts
        )
        children = []
        for (kind, parents), payload in zip(drafts, payloads):
            child = self._persist_child(subproblem, payload, kind, parents, next_index)
            if child is not None:
                children.append(child)

        deaths: list[dict] = []
        pool = list({p.id: p for p in members + children}.values())
        self._run_tournament(subproblem, pool, next_index)

        ratings_now = {p.id: p.elo.rating for p in pool}
        rejected = set()
        for child in children:
            if child.origin != ORIGIN_CROSSOVER:
                continue
            weaker = min(ratings_now[p] for p in child.parent_ids)
            if ratings_now[child.id] <= weaker:
                rejected.add(child.id)
                deaths.append({"id": child.id, "reason": DEATH_CROSSOVER_REJECTED})
        pool = [p for p in pool if p.id not in rejected]

        clusters = dedupe(pool, self.dedupe_threshold)
        keep: set[str] = set()
        for cluster, survivor in zip(clusters.clusters, clusters.survivors):
            cluster_elites = [i for i in cluster if i in elite_ids]
            chosen = set(cluster_elites) if cluster_elites else {survivor}
            keep.update(chosen)
            for member_id in cluster:
                if member_id not in chosen:
                    deaths.append({"id": member_id, "reason": DEATH_DUPLICATE})
        pool = [self.store.get_policy(p.id) for p in pool if p.id in keep]

        ranked_pool = sorted(pool, key=lambda p: (-p.elo.rating, p.id))
        members_next = [p for p in ranked_pool if p.id in elite_ids]
        for pol in ranked_pool:
            if len(members_next) >= population_size:
                break
            if pol.id not in elite_ids:
                members_next.append(pol)
        admitted = {m.id for m in members_next}
        for pol in ranked_pool:
            if pol.id not in admitted:
                deaths.append({"id": pol.id, "reason": DEATH_OUTCOMPETED})
        members_next.sort(key=lambda p: (-p.elo.rating, p.id))

        births = {"crossover": 0, "mutation": 0, "immigration": 0}
        child_origin = {c.id: c.origin for c in children}
        previous = set(report_n.member_ids)
        for member in members_next:
            if member.id in child_origin and member.id not in previous:
                key = (
                    "crossover"
                    if child_origin[member.id] == ORIGIN_CROSSOVER
                    else "mutation"
                )
                births[key] += 1

        out = GenerationReport(
            kind=REPORT_KIND,
            subproblem_id=subproblem.id,
            index=next_index,
            member_ids=[m.id for m in members_next],
            ratings={m.id: m.elo.rating for m in members_next},
            births=births,
            deaths=deaths,
        )
        self.store.record_generation(out)
        return out

    def _draft_payload(self, subproblem, draft) -> Optional[dict]:
        kind, parents = draft
        slots = {
            "statement": self.store.statement.text,
            "subproblem": subproblem.text(),
            "entities": prompts.format_entities(subproblem.affected_entities),
        }
        if kind == "crossover":
            node = AgentNode(
                name="policy-crossover",
                template="crossover",
                tier="deep",
                output_schema="json_object",
            )
            slots["solution_one_json"] = policy_json(parents[0])
            slots["solution_two_json"] = policy_json(parents[1])
        else:
            node = AgentNode(
                name="policy-mutate",
                template="mutation",
                tier="deep",
                output_schema="json_object",
            )
            slots["rate_instruction"] = prompts.MUTATION_RATE_INSTRUCTIONS[
                self.evolution_config.mutation_rate
            ]
            slots["solution_json"] = policy_json(parents[0])
        try:
            return run_node(self.hub, node, slots)
        except NodeError as exc:
            self._warn(f"policy {kind} draft discarded: {exc}")
            return None

    def _persist_child(self, subproblem, payload, kind, parents, next_index):
        if payload is None:
            return None
        fields = solution_payload_fields(payload)
        if fields is None:
            self._warn(f"policy {kind} child discarded: missing title/description")
            return None
        cited = sorted({i for p in parents for i in p.source_solution_ids})
        try:
            return self.store.new_policy(
                subproblem_id=subproblem.id,
                title=fields["title"],
                description=fields["description"],
                source_solution_ids=cited,
                origin=ORIGIN_CROSSOVER if kind == "crossover" else ORIGIN_MUTATION,
                generation_index=next_index,
                parent_ids=[p.id for p in parents],
            )
        except ModelError as exc:
            self._warn(f"policy {kind} child discarded: {exc}")
            return None

    def _run_tournament(self, subproblem, pool, next_index: int) -> None:
        voter = model_pair_voter(
            self.hub,
            "pairwise_solution",
            lambda a, b: {
                "interest_instruction": self.store.statement.ranking_guidance
                or prompts.DEFAULT_INTEREST_INSTRUCTION,
                "problem": subproblem.text(),
                "component_one": a.text(),
                "pro_one": prompts.top_pro(a),
                "con_one": prompts.top_con(a),
                "component_two": b.text(),
                "pro_two": prompts.top_pro(b),
                "con_two": prompts.top_con(b),
            },
        )
        tournament_id = f"pol-{subproblem.id}-g{next_index}"
        self.store.open_tournament(
            {
                "id": tournament_id,
                "kind": "policy",
                "item_ids": [p.id for p in pool],
                "open": True,
                "voter_kind": "model",
            }
        )
        run_tournament(
            pool,
            self.evolution_config.tournament,
            voter,
            config=self.elo_config,
            rng=derive_rng(self.seed, "policy-tournament", subproblem.id, next_index),
            tournament_id=tournament_id,
            voter_kind="model",
            recorder=lambda c, a, b: self.store.record_comparison(c, [a, b]),
        )
        self.store.close_tournament(tournament_id)

    def _report(self, subproblem_id: str, index: int) -> Optional[GenerationReport]:
        for rep in self.store.generation_reports(REPORT_KIND, subproblem_id):
            if rep.index == index:
                return rep
        return None

    # -------------------------------------------------------------- evidence

    def gather_evidence(self, policy: Policy, categories: Optional[Sequence[str]] = None) -> Policy:
        """Attach per-category evidence to one policy and return the fresh row.

        Categories with zero findings stay empty; fetch and search trouble
        surfaces as warnings, never as a failed policy.
        """
        cats = list(self.config.evidence_categories if categories is None else categories)
        if not cats:
            raise PolicyError("categories must be non-empty")
        if len(set(cats)) != len(cats):
            raise PolicyError("category names must be unique")
        if len(cats) != EXPECTED_EVIDENCE_CATEGORY_COUNT:
            self._warn(
                f"gathering {len(cats)} evidence categories; full deployments run"
                f" {EXPECTED_EVIDENCE_CATEGORY_COUNT}"
            )
        if self.research is None:
            raise PolicyError("a research engine is required to gather evidence")
        items = self.research.gather_evidence_for(policy, cats)
        order = {name: i for i, name in enumerate(cats)}
        unknown = [it for it in items if it.category not in order]
        if unknown:
            raise PolicyError(
                f"evidence outside the configured categories: {unknown[0].category}"
            )
        fresh = self.store.get_policy(policy.id)
        fresh.evidence = sorted(items, key=lambda it: order[it.category])
        self.store.update_policy(fresh)
        return self.store.get_policy(policy.id)

    def _warn(self, message: str) -> None:
        log.warning("%s", message)
        self.warnings.append(message)


def evidence_export(store, policy_id: str, visible_bullets: int = 3) -> dict:
    """Evidence dossier for one policy, grouped by category in stored order.

    Each item carries at most visible_bullets bullets plus a count of how
    many more the store holds, which is how the dossier panel presents them.
    """
    pol = store.get_policy(policy_id)
    categories: dict[str, list] = {}
    names: list[str] = []
    for item in pol.evidence:
        if item.category not in categories:
            categories[item.category] = []
            names.append(item.category)
        categories[item.category].append(
            {
                "summary": item.summary,
                "bullets": list(item.bullets[:visible_bullets]),
                "more_count": max(0, len(item.bullets) - visible_bullets),
                "source": {"url": item.source.url, "title": item.source.title},
            }
        )
    return {
        "policy_id": pol.id,
        "title": pol.title,
        "source_solution_ids": list(pol.source_solution_ids),
        "categories": [
            {"name": name, "items": categories[name]} for name in names
        ],
    }
