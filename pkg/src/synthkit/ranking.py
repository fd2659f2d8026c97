"""Elo pairwise-voting tournaments.

Items of any kind (sub-problems, solutions, policies, search queries) are
ranked by running pairwise contests: a voter looks at two items and answers
"One", "Two", or "Neither", and Elo updates turn those votes into ratings.
Voters can be model agents, deterministic mocks, or humans via the gateway —
the tournament machinery is identical for all three.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

from .config import ConfigError, EloConfig, TournamentPlan
from .model import VOTE_OUTCOMES, Comparison, EloState
from .util import bounded_map, now_rfc3339

log = logging.getLogger(__name__)


class RankingError(RuntimeError):
    pass


class RatedItem(Protocol):
    id: str
    elo: EloState

    def text(self) -> str: ...


def expected_score(r_a: float, r_b: float, config: Optional[EloConfig] = None) -> float:
    """Probability-like expectation that the first item beats the second."""
    config = config or EloConfig()
    return 1.0 / (1.0 + config.base ** ((r_b - r_a) / config.scale))


def apply_outcome(
    r_a: EloState, r_b: EloState, outcome: str, config: Optional[EloConfig] = None
) -> tuple[EloState, EloState]:
    """New Elo states after one comparison. One ⇒ first wins; Neither ⇒ draw."""
    config = config or EloConfig()
    if outcome not in VOTE_OUTCOMES:
        raise RankingError(f"unknown outcome: {outcome}")
    e_a = expected_score(r_a.rating, r_b.rating, config)
    s_a = {"One": 1.0, "Two": 0.0, "Neither": 0.5}[outcome]
    delta = config.k_factor * (s_a - e_a)
    return (
        EloState(rating=r_a.rating + delta, games_played=r_a.games_played + 1),
        EloState(rating=r_b.rating - delta, games_played=r_b.games_played + 1),
    )


def min_games_for(n_items: int, plan: TournamentPlan) -> int:
    if plan.min_games_per_item > 0:
        return plan.min_games_per_item
    games = 4
    while (1 << (games - 4)) < n_items:
        games += 1
    return games


def _games_at(rounds: int, n: int) -> int:
    """Guaranteed per-item game count: one game per round, minus bye rounds."""
    if n % 2 == 0:
        return rounds
    return rounds - (rounds + n - 1) // n


def schedule_pairs(
    items: Sequence[RatedItem], plan: TournamentPlan, rng: random.Random
) -> list[tuple[str, str]]:
    """Build the full pairing schedule for a tournament.

    Each round is a perfect matching (odd item counts rotate a bye), so
    every item plays at most once per round and — bye rounds aside — exactly
    `rounds` games overall. rating_adjacent sorts by current rating and pairs
    neighbors for refinement rounds; random_uniform shuffles.

    When min_games_per_item is left at 0 the minimum is derived from the
    item count and the round count grows to meet it; an explicit minimum is
    honored strictly and raises ConfigError when the rounds cannot give it.
    """
    if len(items) < 2:
        raise RankingError("need at least 2 items to schedule a tournament")
    ids = [it.id for it in items]
    if len(set(ids)) != len(ids):
        raise RankingError("duplicate item ids in tournament")
    min_games = min_games_for(len(items), plan)
    rounds = plan.rounds
    if plan.min_games_per_item > 0:
        if _games_at(rounds, len(ids)) < min_games:
            raise ConfigError(
                f"{rounds} rounds cannot give {len(ids)} items {min_games} games each"
            )
    else:
        while _games_at(rounds, len(ids)) < min_games:
            rounds += 1
    by_id = {it.id: it for it in items}
    pairs: list[tuple[str, str]] = []
    bye_cursor = 0
    for round_no in range(rounds):
        if plan.pairing == "rating_adjacent":
            ordered = sorted(ids, key=lambda i: (-by_id[i].elo.rating, i))
            # Offset alternate rounds so neighbors vary.
            if round_no % 2 == 1 and len(ordered) > 2:
                ordered = [ordered[0]] + ordered[2:] + [ordered[1]]
        else:
            ordered = list(ids)
            rng.shuffle(ordered)
        if len(ordered) % 2 == 1:
            # Deterministic rotating bye so no item sits out twice in a row.
            bye = ids[bye_cursor % len(ids)]
            bye_cursor += 1
            ordered.remove(bye)
        for k in range(0, len(ordered), 2):
            pairs.append((ordered[k], ordered[k + 1]))
    return pairs


PairVoter = Callable[[RatedItem, RatedItem], str]
ComparisonRecorder = Callable[[Comparison, RatedItem, RatedItem], None]


@dataclass
class TournamentResult:
    items: list  # rating-descending
    comparisons: list[Comparison] = field(default_factory=list)
    skipped_pairs: int = 0

    def ranking(self) -> list[str]:
        return [it.id for it in self.items]


def sorted_by_rating(items: Sequence[RatedItem]) -> list:
    return sorted(items, key=lambda it: (-it.elo.rating, it.id))


def run_tournament(
    items: Sequence[RatedItem],
    plan: TournamentPlan,
    voter: PairVoter,
    config: Optional[EloConfig] = None,
    rng: Optional[random.Random] = None,
    tournament_id: str = "",
    voter_kind: str = "mock",
    voter_id: str = "",
    recorder: Optional[ComparisonRecorder] = None,
    max_concurrent: int = 1,
) -> TournamentResult:
    """Schedule pairs, collect votes, apply Elo updates in schedule order.

    Votes may be collected concurrently, but updates are always applied in
    the canonical schedule order so ratings are independent of completion
    timing. A voter error skips that pair; more than half skipped fails the
    tournament.
    """
    config = config or EloConfig()
    rng = rng or random.Random(0)
    items = list(items)
    if plan.reset_ratings:
        for it in items:
            it.elo = EloState(rating=config.initial_rating, games_played=0)
    by_id = {it.id: it for it in items}
    pairs = schedule_pairs(items, plan, rng)

    def collect(pair: tuple[str, str]) -> tuple[str, str, Optional[str], Optional[Exception]]:
        a, b = pair
        try:
            outcome = voter(by_id[a], by_id[b])
        except Exception as exc:  # voter failures must not sink the round
            return a, b, None, exc
        return a, b, outcome, None

    if max_concurrent > 1:
        votes = bounded_map(collect, pairs, max_concurrent)
    else:
        votes = [collect(p) for p in pairs]

    result = TournamentResult(items=[])
    for a, b, outcome, exc in votes:
        if exc is not None or outcome not in VOTE_OUTCOMES:
            result.skipped_pairs += 1
            log.warning(
                "skipping pair (%s, %s): %s", a, b, exc if exc else f"bad vote {outcome!r}"
            )
            continue
        comparison = Comparison(
            tournament_id=tournament_id,
            item_a=a,
            item_b=b,
            outcome=outcome,
            voter_kind=voter_kind,
            voter_id=voter_id,
            timestamp=now_rfc3339(),
        )
        by_id[a].elo, by_id[b].elo = apply_outcome(
            by_id[a].elo, by_id[b].elo, outcome, config
        )
        result.comparisons.append(comparison)
        if recorder is not None:
            recorder(comparison, by_id[a], by_id[b])
    if pairs and result.skipped_pairs * 2 > len(pairs):
        raise RankingError(
            f"tournament failed: {result.skipped_pairs}/{len(pairs)} pairs skipped"
        )
    result.items = sorted_by_rating(items)
    return result


def model_pair_voter(
    hub,
    template_name: str,
    render_slots: Callable[[RatedItem, RatedItem], dict],
    tier: str = "fast",
    seed: Optional[int] = None,
) -> PairVoter:
    """Wrap a pairwise prompt template as a tournament voter.

    render_slots maps the pair to template slots; the model's reply is used
    verbatim when it is one of the vote tokens, otherwise scanned for one.
    """
    from . import prompts

    def vote(a: RatedItem, b: RatedItem) -> str:
        rendered = prompts.render(template_name, **render_slots(a, b))
        request_kw = {}
        if seed is not None:
            request_kw["seed"] = seed
        from .providers import ModelRequest

        response = hub.complete(
            ModelRequest(
                tier=tier,
                system_message=rendered.system,
                user_message=rendered.user,
                template=rendered.template,
                slots=rendered.slots,
                **request_kw,
            )
        )
        text = response.text.strip()
        if text in VOTE_OUTCOMES:
            return text
        for token in VOTE_OUTCOMES:
            if token in text:
                return token
        raise RankingError(f"unparseable vote: {text[:80]!r}")

    return vote
