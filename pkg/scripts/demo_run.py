#!/usr/bin/env python3
"""Offline end-to-end demo: bundled fixture corpus, mock providers.

Creates a project, runs problems -> solutions -> policies -> evidence, and
prints what came out. Desk-scale config by default; --full switches to the
production population/generation sizes (slow, still offline).

    python3 scripts/demo_run.py --workdir /tmp/demo --seed 3
"""

import argparse
import logging
import shutil
import sys
import tempfile

sys.path.insert(0, "src")

from synthkit import democorpus
from synthkit.config import ProjectConfig, TournamentPlan, apply_overrides
from synthkit.model import ProblemStatement
from synthkit.pipeline import Pipeline
from synthkit.providers import offline_hub
from synthkit.research import FixtureFetcher
from synthkit.store import ProjectStore

DESK_SCALE = {
    "subproblem_count": 3,
    "research.categories": ["general"],
    "research.queries_per_category": 3,
    "research.top_queries_to_search": 3,
    "research.results_per_query": 5,
    "evolution.population_size": 8,
    "evolution.generations": 3,
    "evolution.immigration_per_generation": 1,
    "policy.policies_per_subproblem": 3,
    "policy.evidence_queries_per_category": 2,
    "policy.evidence_results_per_query": 3,
}


def build_config(full: bool, seed: int) -> ProjectConfig:
    overrides = {} if full else dict(DESK_SCALE)
    overrides["seed"] = seed
    config = apply_overrides(ProjectConfig(), overrides)
    if not full:
        config.research.query_tournament = TournamentPlan(rounds=3, min_games_per_item=2)
        config.evolution.tournament = TournamentPlan(rounds=4, min_games_per_item=2)
    return config


def announce(kind: str, payload: dict) -> None:
    if kind == "node_started":
        print(f"-> {payload['node']}")
    elif kind == "generation_done":
        print(
            f"   {payload['subproblem_id']} {payload['kind']}"
            f" generation {payload['index']}: {payload['members']} members"
        )
    elif kind == "warning":
        print(f"   warning: {payload['message']}", file=sys.stderr)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", default=None, help="keep artifacts here (default: temp dir)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--full", action="store_true", help="production-size config")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR)

    workdir = args.workdir or tempfile.mkdtemp(prefix="synthkit-demo-")
    corpus = democorpus.write_corpus(f"{workdir}/corpus")
    store = ProjectStore.create(
        f"{workdir}/project",
        ProblemStatement(text=democorpus.DEMO_STATEMENT),
        config=build_config(args.full, args.seed),
        project_id="proj-demo",
    )
    print(f"project at {workdir}/project (seed {args.seed})")

    hub = offline_hub(store.config(), seed=args.seed, corpus_dir=corpus)
    pipeline = Pipeline(
        hub, store, FixtureFetcher(corpus), seed=args.seed, on_event=announce
    )
    pipeline.run()

    print("\n== sub-problems ==")
    for sp in store.subproblems():
        flag = "" if sp.active else "  [inactive]"
        print(f"  {sp.id}  {sp.elo.rating:7.1f}  {sp.title}{flag}")

    for sp in (s for s in store.subproblems() if s.active):
        reports = store.generation_reports("solution", sp.id)
        print(f"\n== top solutions for {sp.id} ({len(reports) - 1} generations) ==")
        last = reports[-1]
        ranked = sorted(last.member_ids, key=lambda i: (-last.ratings[i], i))
        for sol_id in ranked[:3]:
            sol = store.get_solution(sol_id)
            print(f"  {sol.elo.rating:7.1f}  {sol.title}  [{sol.origin}]")

    print("\n== policies ==")
    for pol in store.policies():
        print(f"  {pol.elo.rating:7.1f}  {pol.title}  ({len(pol.evidence)} evidence items)")

    spend = hub.ledger.snapshot()
    print(
        f"\nmodel usage: {spend['total_micro']} micro-units across"
        f" {', '.join(sorted(spend['per_tier']))}"
    )
    store.close()
    if args.workdir is None:
        shutil.rmtree(workdir)
        print("(temp artifacts removed; pass --workdir to keep them)")


if __name__ == "__main__":
    main()
