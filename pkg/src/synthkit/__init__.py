"""Problem discovery, solution evolution and policy synthesis toolkit.

The package turns a single problem statement into ranked sub-problems,
evolves candidate solutions against each of them with pairwise-voting
tournaments, distills the strongest solutions into policies, and attaches
web evidence to each policy. Everything runs offline against deterministic
mock providers for tests and experiments, or against real HTTP providers in
production.
"""

__version__ = "0.1.0"
