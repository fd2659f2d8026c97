#!/usr/bin/env python3
"""How many pairwise games does the rating engine need to recover a known
ranking?

Items get hidden latent qualities; a noisy voter prefers the higher-quality
side with probability that grows with the quality gap. For each games-per-item
budget we report the Kendall rank correlation between the final rating order
and the latent order, averaged over seeds.

    python3 scripts/convergence_study.py --items 20 --seeds 10
"""

import argparse
import random
import sys

sys.path.insert(0, "src")

from synthkit.config import TournamentPlan
from synthkit.model import EloState
from synthkit.providers import mock_latent_quality
from synthkit.ranking import run_tournament


class Candidate:
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


def make_voter(seed, noise, rng):
    """Prefer the higher-latent side; flip with probability `noise`."""

    def vote(a, b):
        qa = mock_latent_quality(a.text(), seed)
        qb = mock_latent_quality(b.text(), seed)
        verdict = "One" if qa >= qb else "Two"
        if rng.random() < noise:
            verdict = "Two" if verdict == "One" else "One"
        return verdict

    return vote


def trial(n_items, games, seed, noise):
    items = [
        Candidate(f"c-{i:02d}", f"Candidate proposal {i} with angle {i * 17}")
        for i in range(n_items)
    ]
    latent_order = sorted(
        items, key=lambda it: -mock_latent_quality(it.body, seed)
    )
    rng = random.Random(seed * 1000 + games)
    result = run_tournament(
        items,
        TournamentPlan(rounds=max(games, 1), min_games_per_item=games),
        make_voter(seed, noise, rng),
        rng=random.Random(seed + 100),
    )
    return kendall_tau(result.ranking(), [it.id for it in latent_order])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--items", type=int, default=20)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--noise", type=float, default=0.0, help="vote flip probability")
    parser.add_argument(
        "--games",
        type=int,
        nargs="+",
        default=[2, 5, 10, 20, 40],
        help="games-per-item budgets to sweep",
    )
    args = parser.parse_args()

    print(f"{args.items} items, {args.seeds} seeds, vote noise {args.noise:.0%}")
    print(f"{'games/item':>10}  {'mean tau':>8}  {'min tau':>8}  {'tau>=0.8':>8}")
    for games in args.games:
        taus = [trial(args.items, games, seed, args.noise) for seed in range(args.seeds)]
        hits = sum(1 for t in taus if t >= 0.8)
        print(
            f"{games:>10}  {sum(taus) / len(taus):>8.3f}  {min(taus):>8.3f}"
            f"  {hits:>5}/{args.seeds}"
        )


if __name__ == "__main__":
    main()
