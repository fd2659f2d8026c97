"""Tests for the generational solution-refinement loop: seeding, genetic
operators, per-generation invariants, resume behavior, and lineage export."""

import pytest

from synthkit.config import ProjectConfig, TournamentPlan
from synthkit.evolution import (
    DEATH_CROSSOVER_REJECTED,
    DEATH_DUPLICATE,
    DEATH_NONVIABLE,
    EvolutionError,
    SolutionEvolver,
    lineage_export,
)
from synthkit.model import (
    AffectedEntity,
    EloState,
    GenerationReport,
    ProblemStatement,
    assert_lineage_acyclic,
)
from synthkit.providers import MockRecording, mock_latent_quality, offline_hub
from synthkit.store import ProjectStore

WEB_SOLUTIONS = [
    ("Neighborhood Repair Cooperatives", "Train resident crews to fix leaks on shared mains with municipal parts stipends."),
    ("Smart Leak Sensor Grants", "Subsidize acoustic sensors across trunk lines so crews find failures before road collapse."),
    ("Regional Maintenance Compacts", "Pool equipment and specialist staff across neighboring towns through standing agreements."),
    ("Rate Restructuring for Reserves", "Phase in tiered water rates that fund a ring-fenced replacement reserve."),
    ("Apprentice Operator Pipelines", "Partner with trade schools to certify young operators before retirements hit."),
    ("Open Asset Condition Maps", "Publish pipe age and break history so councils prioritize worst segments first."),
    ("State Revolving Loan Navigators", "Fund shared grant writers who package small-town applications for revolving funds."),
    ("Mutual Aid Emergency Teams", "Pre-authorize cross-town crews and parts depots for main break emergencies."),
    ("Consolidated Billing Platforms", "Share one billing and metering backend across systems to cut overhead."),
    ("Watershed Protection Easements", "Buy easements upstream so treatment plants face cleaner source water."),
]


def make_setup(
    tmp_path,
    population_size=6,
    rows=4,
    min_games=2,
    immigration=2,
    seed=0,
    n_solutions=8,
    recordings=(),
):
    cfg = ProjectConfig()
    cfg.evolution.population_size = population_size
    cfg.evolution.tournament = TournamentPlan(rounds=rows, min_games_per_item=min_games)
    cfg.evolution.immigration_per_generation = immigration
    store = ProjectStore.create(
        str(tmp_path / "proj"),
        ProblemStatement(text="Keep small town drinking water reliable"),
        config=cfg,
    )
    sp = store.new_subproblem(
        title="Aging Water Infrastructure",
        description="Pipes and treatment plants are decades past design life.",
        affected_entities=[
            AffectedEntity(name="Residents", negative_effects=["boil water notices"])
        ],
    )
    for title, description in WEB_SOLUTIONS[:n_solutions]:
        store.new_solution(
            subproblem_id=sp.id, title=title, description=description
        )
    hub = offline_hub(store.config(), seed=seed, recordings=list(recordings))
    return SolutionEvolver(hub, store, sp, seed=seed), store, sp


# ---------------------------------------------------------------------------
# seeding


def test_seed_population_takes_top_by_rating(tmp_path):
    evolver, store, sp = make_setup(tmp_path, population_size=6, n_solutions=8)
    rows = store.solutions(subproblem_id=sp.id)
    for offset, sol in enumerate(rows):
        sol.elo = EloState(rating=1000.0 + offset * 10, games_played=5)
        store.update_solution(sol)
    report = evolver.seed_population()
    assert report.index == 0
    assert len(report.member_ids) == 6
    expected = [s.id for s in sorted(rows, key=lambda s: (-s.elo.rating, s.id))[:6]]
    assert report.member_ids == expected
    # Members got their pros/cons analysis at admission.
    for member_id in report.member_ids:
        sol = store.get_solution(member_id)
        assert len(sol.pros) == 3 and len(sol.cons) == 3


def test_seed_population_accepts_seed_solutions(tmp_path):
    evolver, store, sp = make_setup(tmp_path, population_size=20, n_solutions=0)
    seeds = [
        {"title": f"Recommendation {i}", "description": f"Expert-provided step {i}."}
        for i in range(14)
    ]
    report = evolver.seed_population(seeds)
    assert len(report.member_ids) == 14
    assert all(store.get_solution(i).origin == "seeded" for i in report.member_ids)


def test_seed_population_small_candidate_pool_warns(tmp_path):
    evolver, store, sp = make_setup(tmp_path, population_size=65, n_solutions=2)
    report = evolver.seed_population()
    assert len(report.member_ids) == 2
    assert any("2 members" in w for w in evolver.warnings)


def test_seed_population_needs_two_candidates(tmp_path):
    evolver, _, _ = make_setup(tmp_path, n_solutions=1)
    with pytest.raises(EvolutionError, match="at least 2"):
        evolver.seed_population()


def test_seed_population_rejects_reseeding(tmp_path):
    evolver, _, _ = make_setup(tmp_path)
    evolver.seed_population()
    with pytest.raises(EvolutionError, match="already"):
        evolver.seed_population()


def test_seed_population_rejects_bad_seed_payload(tmp_path):
    evolver, _, _ = make_setup(tmp_path, n_solutions=0)
    with pytest.raises(EvolutionError, match="title/description"):
        evolver.seed_population([{"title": "", "description": "x"}])


# ---------------------------------------------------------------------------
# genetic operators


def test_crossover_creates_child_with_lineage(tmp_path):
    evolver, store, sp = make_setup(tmp_path)
    rows = store.solutions(subproblem_id=sp.id)
    child = evolver.crossover(rows[0], rows[1], generation_index=1)
    assert child is not None
    assert child.origin == "crossover"
    assert child.parent_ids == [rows[0].id, rows[1].id]
    assert child.generation_index == 1
    assert child.title and child.description
    # Deterministic drafting: same parents and seed give the same child text.
    again = evolver.crossover(rows[0], rows[1], generation_index=1)
    assert again.title == child.title
    assert again.description == child.description


def test_crossover_same_parent_rejected(tmp_path):
    evolver, store, sp = make_setup(tmp_path)
    row = store.solutions(subproblem_id=sp.id)[0]
    with pytest.raises(EvolutionError, match="distinct"):
        evolver.crossover(row, row, 1)


def test_crossover_invalid_output_discarded(tmp_path):
    bad = MockRecording(template="crossover", user_contains="", response="not json at all")
    evolver, store, sp = make_setup(tmp_path, recordings=[bad])
    rows = store.solutions(subproblem_id=sp.id)
    before = len(store.solutions(subproblem_id=sp.id))
    child = evolver.crossover(rows[0], rows[1], 1)
    assert child is None
    assert len(store.solutions(subproblem_id=sp.id)) == before
    assert any("crossover draft discarded" in w for w in evolver.warnings)


def test_mutate_creates_child(tmp_path):
    evolver, store, sp = make_setup(tmp_path)
    parent = store.solutions(subproblem_id=sp.id)[0]
    child = evolver.mutate(parent, generation_index=2)
    assert child.origin == "mutation"
    assert child.parent_ids == [parent.id]
    assert child.generation_index == 2
    assert child.title != parent.title


def test_mutate_unknown_tier(tmp_path):
    evolver, store, sp = make_setup(tmp_path)
    parent = store.solutions(subproblem_id=sp.id)[0]
    with pytest.raises(EvolutionError, match="rate tier"):
        evolver.mutate(parent, 1, rate_tier="extreme")


def test_mutate_worked_example_via_recording(tmp_path):
    parent_title = "Encourage Citizen Oversight through Digital Transparency Reforms"
    child_json = (
        '{"title": "Implement Whistleblower Protection and Reward Systems",'
        ' "description": "Introduce a comprehensive whistleblower protection program'
        " that safeguards individuals who report corrupt practices, including legal"
        " protections against retaliation, anonymity options, and rewards that"
        ' compensate whistleblowers for their risks.",'
        ' "mainBenefitOfSolution": "Empowers insiders to act against corruption'
        ' through a safe reporting channel.",'
        ' "mainObstacleToSolutionAdoption": "Political resistance from those who view'
        ' such protections as a threat, plus setup and maintenance costs."}'
    )
    recording = MockRecording(
        template="mutation", user_contains=parent_title, response=child_json
    )
    evolver, store, sp = make_setup(tmp_path, recordings=[recording])
    parent = store.new_solution(
        subproblem_id=sp.id,
        title=parent_title,
        description=(
            "Promote digital transparency reforms to mitigate corruption, protect"
            " media and internet freedom, and leverage open government data so"
            " citizens can hold public servants accountable."
        ),
    )
    child = evolver.mutate(parent, generation_index=1)
    assert child.title == "Implement Whistleblower Protection and Reward Systems"
    assert child.parent_ids == [parent.id]


def test_generate_pros_cons_counts(tmp_path):
    evolver, store, sp = make_setup(tmp_path)
    sol = store.solutions(subproblem_id=sp.id)[0]
    updated = evolver.generate_pros_cons(sol, n_each=3)
    assert len(updated.pros) == 3
    assert len(updated.cons) == 3
    assert len(set(updated.pros)) == 3
    single = evolver.generate_pros_cons(store.solutions(subproblem_id=sp.id)[1], n_each=1)
    assert len(single.pros) == 1 and len(single.cons) == 1
    with pytest.raises(EvolutionError):
        evolver.generate_pros_cons(sol, n_each=0)


# ---------------------------------------------------------------------------
# generation loop


def _admission_ratings(store, sp_id, generation):
    """Final tournament rating per item for one generation's admission."""
    finals = {}
    for row in store.comparisons(f"evo-{sp_id}-g{generation}"):
        for item_id, elo in row["ratings_after"].items():
            finals[item_id] = elo["rating"]
    return finals


def test_evolution_invariants_over_five_generations(tmp_path):
    evolver, store, sp = make_setup(
        tmp_path, population_size=12, rows=6, min_games=3, n_solutions=10
    )
    evolver.seed_population(
        [
            {"title": "Citizen Water Boards", "description": "Resident panels review utility budgets and capital plans quarterly."},
            {"title": "Backflow Prevention Drives", "description": "Blanket inspection campaigns with free device replacement for homes."},
        ]
    )
    final, reports = evolver.run(5)
    assert len(reports) == 5
    for report in reports:
        # Size conservation.
        assert len(report.member_ids) == 12
        assert len(set(report.member_ids)) == 12
    # The current generation holds only viable members (earlier members may
    # have been retired later as duplicates of stronger newcomers).
    for member_id in reports[-1].member_ids:
        assert store.get_solution(member_id).viable
    # Elitism: the top member of each generation survives into the next.
    all_reports = store.generation_reports("solution", sp.id)
    for earlier, later in zip(all_reports, all_reports[1:]):
        top_id = min(earlier.ratings, key=lambda i: (-earlier.ratings[i], i))
        assert top_id in later.member_ids
    # Lineage is acyclic and parents precede children.
    rows = store.solutions(subproblem_id=sp.id)
    assert_lineage_acyclic(rows)
    by_id = {s.id: s for s in rows}
    for sol in rows:
        for parent_id in sol.parent_ids:
            assert by_id[parent_id].generation_index < sol.generation_index
    # Adoption rule: a crossover child admitted at generation g beat its
    # weaker parent in that admission tournament.
    for report in all_reports[1:]:
        finals = _admission_ratings(store, sp.id, report.index)
        for member_id in report.member_ids:
            sol = by_id[member_id]
            if sol.origin != "crossover" or sol.generation_index != report.index:
                continue
            weaker = min(finals[p] for p in sol.parent_ids)
            assert finals[sol.id] > weaker
    # New members carry the pros/cons analysis.
    for member_id in reports[-1].member_ids:
        sol = store.get_solution(member_id)
        assert len(sol.pros) == 3 and len(sol.cons) == 3
    # Final list is the last generation sorted by rating.
    assert [s.id for s in final] == sorted(
        reports[-1].member_ids,
        key=lambda i: (-store.get_solution(i).elo.rating, i),
    )


def test_evolution_mean_latent_quality_does_not_collapse(tmp_path):
    drops = []
    for seed in range(5):
        evolver, store, sp = make_setup(
            tmp_path / f"s{seed}",
            population_size=12,
            rows=6,
            min_games=3,
            n_solutions=10,
            seed=seed,
        )
        evolver.seed_population(
            [
                {"title": "Citizen Water Boards", "description": "Resident panels review utility budgets and capital plans quarterly."},
                {"title": "Backflow Prevention Drives", "description": "Blanket inspection campaigns with free device replacement."},
            ]
        )
        evolver.run(5)

        def mean_latent(index):
            members = evolver.members(index)
            return sum(
                mock_latent_quality(m.text(), seed) for m in members
            ) / len(members)

        drops.append(mean_latent(5) - mean_latent(0))
    assert all(drop >= -0.02 for drop in drops), drops


def test_run_generations_zero_is_identity(tmp_path):
    evolver, store, sp = make_setup(tmp_path)
    seed_report = evolver.seed_population()
    final, reports = evolver.run(0)
    assert reports == []
    assert [s.id for s in final] == sorted(
        seed_report.member_ids,
        key=lambda i: (-store.get_solution(i).elo.rating, i),
    )


def test_run_requires_seeded_population(tmp_path):
    evolver, _, _ = make_setup(tmp_path)
    with pytest.raises(EvolutionError, match="seed"):
        evolver.run(3)


def test_run_resumes_at_generation_boundary(tmp_path):
    evolver, store, sp = make_setup(tmp_path, population_size=6, n_solutions=8)
    evolver.seed_population()
    _, first_leg = evolver.run(3)
    recorded = [r.member_ids for r in first_leg]
    store.close()

    # Reopen the project as a new process would and continue to 5.
    resumed_store = ProjectStore.open(store.root)
    resumed_sp = resumed_store.get_subproblem(sp.id)
    hub = offline_hub(resumed_store.config(), seed=0)
    resumed = SolutionEvolver(hub, resumed_store, resumed_sp, seed=0)
    marker = hub.audit_mark()
    final, reports = resumed.run(5)
    assert [r.index for r in reports] == [1, 2, 3, 4, 5]
    # Generations 1-3 were loaded from the store, not recomputed.
    assert [r.member_ids for r in reports[:3]] == recorded
    assert len(resumed_store.generation_reports("solution", sp.id)) == 6

    # A straight 5-generation run in a twin project produces identical members
    # while doing strictly more model work than the resumed leg.
    twin_evolver, twin_store, twin_sp = make_setup(
        tmp_path / "twin", population_size=6, n_solutions=8
    )
    twin_evolver.seed_population()
    twin_final, twin_reports = twin_evolver.run(5)
    assert [r.member_ids for r in twin_reports] == [r.member_ids for r in reports]
    assert [s.title for s in twin_final] == [s.title for s in final]
    assert len(hub.uses_since(marker)) < len(twin_evolver.hub.template_uses)


def test_evolution_deterministic_across_twin_projects(tmp_path):
    outputs = []
    for name in ("a", "b"):
        evolver, store, sp = make_setup(tmp_path / name, population_size=6, seed=11)
        evolver.seed_population()
        final, reports = evolver.run(2)
        outputs.append(
            (
                [s.title for s in final],
                [r.member_ids for r in reports],
                [round(r.mean_rating(), 9) for r in reports],
            )
        )
    assert outputs[0] == outputs[1]


def test_population_collapse_raises(tmp_path):
    evolver, store, sp = make_setup(tmp_path)
    lone = store.solutions(subproblem_id=sp.id)[0]
    store.record_generation(
        GenerationReport(
            kind="solution",
            subproblem_id=sp.id,
            index=0,
            member_ids=[lone.id],
            ratings={lone.id: 1000.0},
        )
    )
    with pytest.raises(EvolutionError, match="collapsed"):
        evolver.evolve_generation(0)


def test_evolve_generation_missing_report(tmp_path):
    evolver, _, _ = make_setup(tmp_path)
    with pytest.raises(EvolutionError, match="no generation"):
        evolver.evolve_generation(3)


def test_immigration_prefers_unused_reserve(tmp_path):
    evolver, store, sp = make_setup(tmp_path, population_size=6, n_solutions=10)
    report = evolver.seed_population()
    reserve_ids = {
        s.id
        for s in store.solutions(subproblem_id=sp.id)
        if s.id not in set(report.member_ids)
    }
    assert len(reserve_ids) == 4
    immigrants = evolver._draw_immigrants(2, 1, set(report.member_ids))
    assert all(s.id in reserve_ids for s in immigrants)
    # Nothing new was created while reserve covers the demand.
    assert len(store.solutions(subproblem_id=sp.id)) == 10


def test_immigration_falls_back_to_fresh_candidates(tmp_path):
    evolver, store, sp = make_setup(tmp_path, population_size=6, n_solutions=6)
    report = evolver.seed_population()
    before = len(store.solutions(subproblem_id=sp.id))
    immigrants = evolver._draw_immigrants(2, 1, set(report.member_ids))
    assert len(immigrants) == 2
    assert len(store.solutions(subproblem_id=sp.id)) == before + 2
    assert all(s.generation_index == 1 for s in immigrants)
    assert all(s.origin == "web_sourced" for s in immigrants)


def test_death_reasons_recorded(tmp_path):
    evolver, store, sp = make_setup(
        tmp_path, population_size=8, rows=5, min_games=2, n_solutions=10
    )
    evolver.seed_population()
    _, reports = evolver.run(3)
    reasons = {d["reason"] for r in reports for d in r.deaths}
    assert reasons <= {
        DEATH_NONVIABLE,
        DEATH_CROSSOVER_REJECTED,
        DEATH_DUPLICATE,
        "outcompeted",
    }
    # Every pool participant that did not become a member has a death record.
    for report in reports:
        assert all(isinstance(d["id"], str) and d["reason"] for d in report.deaths)


def test_births_accounting_matches_new_members(tmp_path):
    evolver, store, sp = make_setup(tmp_path, population_size=8, n_solutions=10)
    evolver.seed_population()
    _, reports = evolver.run(2)
    all_reports = store.generation_reports("solution", sp.id)
    for earlier, later in zip(all_reports, all_reports[1:]):
        new_ids = set(later.member_ids) - set(earlier.member_ids)
        assert sum(later.births.values()) == len(new_ids)


# ---------------------------------------------------------------------------
# lineage export


def test_lineage_export_structure(tmp_path):
    evolver, store, sp = make_setup(tmp_path, population_size=6, n_solutions=8)
    evolver.seed_population()
    evolver.run(2)
    doc = lineage_export(store, sp.id)
    assert doc["subproblem_id"] == sp.id
    rows = store.solutions(subproblem_id=sp.id)
    assert {n["id"] for n in doc["nodes"]} == {s.id for s in rows}
    by_id = {s.id: s for s in rows}
    for edge in doc["edges"]:
        child = by_id[edge["to"]]
        assert edge["from"] in child.parent_ids
        assert by_id[edge["from"]].generation_index < child.generation_index
    expected_edges = {
        (p, s.id) for s in rows for p in s.parent_ids if p in by_id
    }
    assert {(e["from"], e["to"]) for e in doc["edges"]} == expected_edges
