"""Acceptance gate: one check per core guarantee of the toolkit.

Each test pins one externally visible behavior with explicit tolerances:
rating arithmetic and convergence, evolutionary invariants, judging
arithmetic against reconstruction fixtures, validation-loop repair power,
byte-level pipeline determinism, and resume equivalence. Run with -v to get
one pass/fail line per guarantee.
"""

import random
import tempfile
import time

import pytest

from synthkit import democorpus
from synthkit.config import (
    EvolutionConfig,
    PolicyConfig,
    ProjectConfig,
    ResearchConfig,
    TournamentPlan,
)
from synthkit.model import (
    AffectedEntity,
    EloState,
    JudgmentRecord,
    ProblemStatement,
    Requirement,
    SubProblem,
    assert_lineage_acyclic,
)
from synthkit.evolution import SolutionEvolver
from synthkit.orchestrator import ValidationExhausted, compress_text
from synthkit.pipeline import Pipeline
from synthkit.prompts import JUDGE_SYSTEM_PROMPT
from synthkit.providers import MockRecording, mock_latent_quality, offline_hub
from synthkit.ranking import apply_outcome, expected_score, run_tournament
from synthkit.rater import Rater, aggregate
from synthkit.research import FixtureFetcher, dedupe
from synthkit.store import ProjectStore, store_fingerprint

# ---------------------------------------------------------------------------
# shared helpers


class RatedText:
    def __init__(self, id, body):
        self.id = id
        self.body = body
        self.elo = EloState()

    def text(self):
        return self.body


def kendall_tau(order_a, order_b):
    pos = {item: i for i, item in enumerate(order_b)}
    ranks = [pos[item] for item in order_a]
    concordant = discordant = 0
    for i in range(len(ranks)):
        for j in range(i + 1, len(ranks)):
            if ranks[i] < ranks[j]:
                concordant += 1
            else:
                discordant += 1
    total = concordant + discordant
    return (concordant - discordant) / total if total else 1.0


def latent_voter(seed):
    def vote(a, b):
        qa = mock_latent_quality(a.text(), seed)
        qb = mock_latent_quality(b.text(), seed)
        return "One" if qa >= qb else "Two"

    return vote


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus")
    democorpus.write_corpus(str(path))
    return str(path)


# ---------------------------------------------------------------------------
# rating arithmetic


def test_elo_identities_hold_over_ten_thousand_updates():
    assert expected_score(1000, 1000) == 0.5
    rng = random.Random(7)
    items = [EloState(rng.uniform(800, 1200)) for _ in range(10)]
    total_before = sum(s.rating for s in items)
    start = time.perf_counter()
    for _ in range(10_000):
        i, j = rng.sample(range(10), 2)
        assert expected_score(items[i].rating, items[j].rating) + expected_score(
            items[j].rating, items[i].rating
        ) == pytest.approx(1.0, abs=1e-12)
        items[i], items[j] = apply_outcome(
            items[i], items[j], rng.choice(["One", "Two", "Neither"])
        )
    elapsed = time.perf_counter() - start
    total_after = sum(s.rating for s in items)
    assert total_after == pytest.approx(total_before, abs=1e-9)
    assert elapsed < 1.0


def test_elo_worked_update_is_exact():
    a, b = apply_outcome(EloState(1000), EloState(1000), "One")
    assert (a.rating, b.rating) == (1008.0, 992.0)


def test_elo_recovers_latent_order_in_nine_of_ten_seeds():
    successes = 0
    start = time.perf_counter()
    for seed in range(10):
        items = [
            RatedText(f"c-{i:02d}", f"Candidate proposal {i} with angle {i * 17}")
            for i in range(20)
        ]
        latent_order = sorted(
            (it.id for it in items),
            key=lambda i: -mock_latent_quality(
                next(x.body for x in items if x.id == i), seed
            ),
        )
        result = run_tournament(
            items,
            TournamentPlan(rounds=20, min_games_per_item=20),
            latent_voter(seed),
            rng=random.Random(seed + 100),
        )
        if kendall_tau(result.ranking(), latent_order) >= 0.8:
            successes += 1
    elapsed = time.perf_counter() - start
    assert successes >= 9
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# evolutionary invariants

CANDIDATE_ROWS = [
    ("Cool Roof Retrofits", "Subsidize reflective roofing on the oldest housing stock block by block."),
    ("Shade Corridor Plantings", "Plant staggered street trees along school walking routes first."),
    ("Transit Stop Canopies", "Add shaded shelters with water taps at the busiest bus stops."),
    ("Cooling Center Network", "Keep libraries and gyms open late on heat alert days with transport."),
    ("Permeable Pavement Swaps", "Replace parking lot asphalt with permeable light-colored surfaces."),
    ("Heat Check Visits", "Organize volunteer wellness visits for isolated older residents."),
    ("Utility Shutoff Moratorium", "Bar summer electricity disconnections for households in arrears."),
    ("White Wall Grants", "Offer micro-grants for reflective exterior paint in dense blocks."),
    ("Night Market Shifts", "Move outdoor vending and events to evening hours in peak months."),
    ("Hydrant Spray Caps", "Fit locking spray caps so hydrants double as cooling stations safely."),
]


def evolver_setup(root, seed):
    cfg = ProjectConfig()
    cfg.evolution.population_size = 12
    cfg.evolution.tournament = TournamentPlan(rounds=6, min_games_per_item=3)
    cfg.evolution.immigration_per_generation = 2
    store = ProjectStore.create(
        str(root),
        ProblemStatement(text="Protect residents from extreme urban heat"),
        config=cfg,
    )
    sp = store.new_subproblem(
        title="Dangerous Indoor Temperatures",
        description="Aging apartments trap heat for days after a heat wave peaks.",
        affected_entities=[
            AffectedEntity(name="Residents", negative_effects=["heat stroke"])
        ],
    )
    for title, description in CANDIDATE_ROWS:
        store.new_solution(subproblem_id=sp.id, title=title, description=description)
    hub = offline_hub(store.config(), seed=seed)
    return SolutionEvolver(hub, store, sp, seed=seed), store, sp


def admission_ratings(store, sp_id, generation):
    finals = {}
    for row in store.comparisons(f"evo-{sp_id}-g{generation}"):
        for item_id, elo in row["ratings_after"].items():
            finals[item_id] = elo["rating"]
    return finals


def test_evolution_invariants_hold_across_five_seeds():
    start = time.perf_counter()
    drops = []
    for seed in range(5):
        with tempfile.TemporaryDirectory() as tmp:
            evolver, store, sp = evolver_setup(f"{tmp}/proj", seed)
            evolver.seed_population(
                [
                    {"title": "Block Captain Heat Plans", "description": "Each block elects a captain who runs a phone tree during alerts."},
                    {"title": "Community Ice Depots", "description": "Stock corner stores with subsidized ice during declared heat waves."},
                ]
            )
            final, reports = evolver.run(5)
            assert len(reports) == 5
            for report in reports:
                assert len(report.member_ids) == 12
                assert len(set(report.member_ids)) == 12
            rows = store.solutions(subproblem_id=sp.id)
            assert_lineage_acyclic(rows)
            by_id = {s.id: s for s in rows}
            all_reports = store.generation_reports("solution", sp.id)
            for earlier, later in zip(all_reports, all_reports[1:]):
                top_id = min(earlier.ratings, key=lambda i: (-earlier.ratings[i], i))
                assert top_id in later.member_ids
            for report in all_reports[1:]:
                finals = admission_ratings(store, sp.id, report.index)
                for member_id in report.member_ids:
                    sol = by_id[member_id]
                    if sol.origin != "crossover" or sol.generation_index != report.index:
                        continue
                    weaker = min(finals[p] for p in sol.parent_ids)
                    assert finals[sol.id] > weaker

            def mean_latent(index):
                members = evolver.members(index)
                return sum(
                    mock_latent_quality(m.text(), seed) for m in members
                ) / len(members)

            drops.append(mean_latent(5) - mean_latent(0))
            store.close()
    elapsed = time.perf_counter() - start
    assert all(drop >= -0.02 for drop in drops), drops
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# coverage-judging arithmetic

# (count_100, count_partial) per requirement over 65 candidates; remaining
# judgments per row sit at or below the 50% threshold.
COVERAGE_FIXTURE_A = [
    (2, 7), (0, 6), (45, 1), (26, 13), (0, 4), (23, 11), (0, 0),
    (0, 3), (0, 1), (6, 3), (1, 0), (0, 14), (11, 19), (18, 12),
]
COVERAGE_FIXTURE_B = [
    (5, 15), (5, 26), (0, 13), (6, 13), (0, 20), (0, 30), (2, 18),
    (2, 24), (22, 21), (1, 23), (1, 24), (10, 21), (10, 29),
]


def fixture_records(table, candidates=65):
    requirements = [
        Requirement(id=f"req-{i:02d}", title=f"Recommendation {i}", text=f"Do thing {i}.")
        for i in range(1, len(table) + 1)
    ]
    records = []
    for req, (full, partial) in zip(requirements, table):
        scores = [100] * full + [75] * partial
        while len(scores) < candidates:
            scores.append(50 if len(scores) % 2 else 25)
        for j, score in enumerate(scores):
            records.append(
                JudgmentRecord(
                    id=f"{req.id}:cand-{j:03d}",
                    requirement_id=req.id,
                    subject_id=f"cand-{j:03d}",
                    coverage_percent=score,
                    judge_id="judge-deep",
                )
            )
    return requirements, records


def test_judging_matrix_counts_and_fixture_totals_are_exact():
    hub = offline_hub(seed=0)
    rater = Rater(hub)
    reqs_14 = [
        Requirement(id=f"r-{i:02d}", title=f"Req {i}", text=f"Require outcome {i}.")
        for i in range(14)
    ]
    subjects = [(f"cand-{j:03d}", f"Candidate plan {j} with mechanism {j}.") for j in range(65)]
    assert len(rater.run_matrix(reqs_14, subjects)) == 14 * 65 == 910
    assert len(Rater(offline_hub(seed=0)).run_matrix(reqs_14[:13], subjects)) == 845

    reqs_a, records_a = fixture_records(COVERAGE_FIXTURE_A)
    table_a = aggregate(records_a, reqs_a)
    assert (table_a.total_100, table_a.total_partial) == (132, 94)
    reqs_b, records_b = fixture_records(COVERAGE_FIXTURE_B)
    table_b = aggregate(records_b, reqs_b)
    assert (table_b.total_100, table_b.total_partial) == (64, 277)


def test_judge_prompt_is_pinned_and_worked_pair_scores_full():
    assert JUDGE_SYSTEM_PROMPT == (
        "1. You are an expert in analyzing how well a solution matches requirements\n"
        "2. Compare the key points in each requirement with the key points in the solution\n"
        "3. If solution does more than required then that is fine\n"
        "4. Always and only output the following JSON format:"
        " [{ requirementTitle, solutionCoversPercent }]"
    )
    requirement = Requirement(
        id="req-civic",
        title="Civic engagement investment",
        text=(
            "Invest in civic engagement projects that get citizens more involved in"
            " elections, helping to educate and build trust in the electoral process."
        ),
    )
    solution = (
        "Philanthropic organizations should invest in initiatives that build trust in"
        " the electoral process. This includes supporting voter education campaigns"
        " that emphasize the importance of peaceful elections, the measures in place"
        " to ensure election integrity, and the consequences of election-related"
        " violence. Funding research to understand the factors that undermine trust"
        " in elections and developing strategies to address these issues is also"
        " crucial."
    )
    recording = MockRecording(
        template="judge",
        user_contains="civic engagement projects",
        response=(
            '[{"requirementTitle": "Civic engagement investment",'
            ' "solutionCoversPercent": 100}]'
        ),
    )
    rater = Rater(offline_hub(recordings=[recording]))
    record = rater.judge_pair(requirement, "sol-trust", solution)
    assert record.coverage_percent == 100


# ---------------------------------------------------------------------------
# validation-loop repair


def test_validation_loop_drives_defects_below_half_percent():
    hub = offline_hub(seed=97, defect_rate=0.10)
    defective = 0
    for i in range(1000):
        try:
            result = compress_text(hub, f"Report item {i} covering a distinct policy fact", 3)
        except ValidationExhausted:
            defective += 1
            continue
        if "[[DEFECT:" in result.text:
            defective += 1
    assert defective / 1000 < 0.005


# ---------------------------------------------------------------------------
# pipeline determinism and resume

PIPELINE_SEED = 11


def pipeline_config():
    return ProjectConfig(
        subproblem_count=2,
        research=ResearchConfig(
            categories=["general"],
            queries_per_category=2,
            top_queries_to_search=2,
            results_per_query=4,
            query_tournament=TournamentPlan(rounds=2, min_games_per_item=1),
        ),
        evolution=EvolutionConfig(
            population_size=6,
            generations=3,
            immigration_per_generation=1,
            tournament=TournamentPlan(rounds=3, min_games_per_item=2),
        ),
        policy=PolicyConfig(
            policies_per_subproblem=3,
            generations=1,
            evidence_categories=["Policy Risks", "Case Studies"],
            evidence_queries_per_category=2,
            evidence_results_per_query=3,
        ),
    )


def fresh_pipeline(root, corpus, create):
    if create:
        store = ProjectStore.create(
            str(root),
            ProblemStatement(text=democorpus.DEMO_STATEMENT),
            config=pipeline_config(),
            project_id="proj-accept",
        )
    else:
        store = ProjectStore.open(str(root))
    hub = offline_hub(store.config(), seed=PIPELINE_SEED, corpus_dir=corpus)
    return Pipeline(hub, store, FixtureFetcher(corpus), seed=PIPELINE_SEED), store


def run_full(root, corpus):
    pipe, store = fresh_pipeline(root, corpus, create=True)
    pipe.run()
    store.close()
    return store_fingerprint(str(root))


def test_pipeline_runs_twice_byte_identical(tmp_path, corpus_dir):
    start = time.perf_counter()
    first = run_full(tmp_path / "a", corpus_dir)
    second = run_full(tmp_path / "b", corpus_dir)
    elapsed = time.perf_counter() - start
    assert first == second
    assert elapsed < 120.0


def test_pipeline_resumes_identically_from_every_stage_boundary(tmp_path, corpus_dir):
    reference = run_full(tmp_path / "straight", corpus_dir)
    for boundary in ("problems", "solutions", "policies", "evidence"):
        root = tmp_path / f"cut-{boundary}"
        pipe, store = fresh_pipeline(root, corpus_dir, create=True)
        pipe.run(through=boundary)  # process "dies" here
        store.close()
        pipe, store = fresh_pipeline(root, corpus_dir, create=False)
        pipe.run()
        store.close()
        assert store_fingerprint(str(root)) == reference, boundary


# ---------------------------------------------------------------------------
# dedupe


def test_dedupe_idempotent_and_matches_hand_jaccard():
    text_a = (
        "invest in civic engagement projects that get citizens more involved"
        " in elections helping to educate and build trust in the electoral process"
    )
    text_b = (
        "invest in civic engagement projects that get citizens more involved"
        " in elections aiming to educate and build trust in the electoral process"
    )
    items = [
        SubProblem(id="sp-1", title=text_a, description=""),
        SubProblem(id="sp-2", title=text_b, description=""),
        SubProblem(id="sp-3", title="fund local news startups", description=""),
    ]
    report = dedupe(items, 0.85)
    # The paraphrase pair shares 19 of 21 distinct tokens: 19/21 > 0.85.
    assert report.similarities["sp-1|sp-2"] == pytest.approx(19 / 21, abs=1e-6)
    assert ["sp-1", "sp-2"] in report.clusters
    assert dedupe(items, 0.91).duplicates() == []

    survivors = [it for it in items if it.id in report.survivors]
    again = dedupe(survivors, 0.85)
    assert again.survivors == report.survivors
    assert again.duplicates() == []
