"""Configuration dataclasses and their defaults.

Every tunable lives here so experiment scripts can override by constructing
configs, and the CLI can override via --set dotted.key=value. Secrets are
never part of config files; they come from environment variables only.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any

# Environment variable names for credentials. Values are read lazily at
# request time so importing the package never requires them.
FAST_KEY_ENV = "SYNTHKIT_FAST_KEY"
DEEP_KEY_ENV = "SYNTHKIT_DEEP_KEY"
SEARCH_KEY_ENV = "SYNTHKIT_SEARCH_KEY"
GATEWAY_SECRET_ENV = "SYNTHKIT_GATEWAY_SECRET"


class ConfigError(ValueError):
    """Raised when a config value is out of range or inconsistent."""


@dataclass
class EloConfig:
    initial_rating: float = 1000.0
    k_factor: float = 16.0
    scale: float = 400.0
    base: float = 10.0

    def validate(self) -> None:
        if self.k_factor <= 0:
            raise ConfigError("k_factor must be positive")
        if self.scale <= 0:
            raise ConfigError("scale must be positive")
        if self.base <= 1:
            raise ConfigError("base must exceed 1")


@dataclass
class TournamentPlan:
    """How many rounds of pairings to play and how pairs are drawn.

    Each round is a (near-)perfect matching, so rounds is also the ceiling
    on games per item. min_games_per_item of 0 means the derived floor
    ceil(log2(n)) + 4 capped by what the round count can deliver.
    """

    rounds: int = 10
    pairing: str = "random_uniform"  # random_uniform | rating_adjacent
    min_games_per_item: int = 0
    reset_ratings: bool = True

    def validate(self) -> None:
        if self.rounds < 1:
            raise ConfigError("rounds must be at least 1")
        if self.pairing not in ("random_uniform", "rating_adjacent"):
            raise ConfigError(f"unknown pairing strategy: {self.pairing}")
        if self.min_games_per_item < 0:
            raise ConfigError("min_games_per_item cannot be negative")


@dataclass
class RetryConfig:
    max_attempts: int = 5
    base_delay_s: float = 1.0
    backoff_factor: float = 2.0
    jitter: str = "full"  # full | none

    def validate(self) -> None:
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be at least 1")
        if self.jitter not in ("full", "none"):
            raise ConfigError(f"unknown jitter mode: {self.jitter}")


@dataclass
class EndpointConfig:
    url: str = ""
    # Micro-currency units per token, exact integer arithmetic in the ledger.
    price_in_per_token: int = 0
    price_out_per_token: int = 0

    def validate(self) -> None:
        if self.price_in_per_token < 0 or self.price_out_per_token < 0:
            raise ConfigError("token prices cannot be negative")


@dataclass
class ProviderConfig:
    fast: EndpointConfig = field(default_factory=lambda: EndpointConfig(price_in_per_token=1, price_out_per_token=2))
    deep: EndpointConfig = field(default_factory=lambda: EndpointConfig(price_in_per_token=10, price_out_per_token=30))
    search: EndpointConfig = field(default_factory=EndpointConfig)
    max_concurrent_requests: int = 10
    retry: RetryConfig = field(default_factory=RetryConfig)

    def validate(self) -> None:
        self.retry.validate()
        self.fast.validate()
        self.deep.validate()
        self.search.validate()
        if self.max_concurrent_requests < 1:
            raise ConfigError("max_concurrent_requests must be at least 1")


# Mutation strength tiers: fraction of the solution the model is asked to
# rework. Tier names are part of the public surface.
MUTATION_RATES = {"low": 0.3, "medium": 0.5, "high": 0.8}


@dataclass
class EvolutionConfig:
    population_size: int = 65
    generations: int = 15
    elite_fraction: float = 0.1
    crossover_fraction: float = 0.6
    mutation_rate: str = "medium"
    immigration_per_generation: int = 2
    selection_temperature: float = 200.0
    tournament: TournamentPlan = field(default_factory=TournamentPlan)
    prune_nonviable: bool = True
    pros_cons_each: int = 3

    def validate(self) -> None:
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if self.generations < 0:
            raise ConfigError("generations cannot be negative")
        if not 0 <= self.elite_fraction < 1:
            raise ConfigError("elite_fraction must be in [0, 1)")
        if not 0 <= self.crossover_fraction <= 1:
            raise ConfigError("crossover_fraction must be in [0, 1]")
        if self.mutation_rate not in MUTATION_RATES:
            raise ConfigError(f"mutation_rate must be one of {sorted(MUTATION_RATES)}")
        if self.immigration_per_generation < 0:
            raise ConfigError("immigration_per_generation cannot be negative")
        if self.immigration_per_generation >= self.population_size:
            raise ConfigError("immigration_per_generation must be below population_size")
        if self.selection_temperature <= 0:
            raise ConfigError("selection_temperature must be positive")
        self.tournament.validate()


@dataclass
class ResearchConfig:
    categories: list[str] = field(
        default_factory=lambda: ["general", "scientific", "openData"]
    )
    include_news: bool = False
    queries_per_category: int = 10
    results_per_query: int = 10
    top_queries_to_search: int = 5
    deep_fraction: float = 0.2
    chunk_token_budget: int = 1200
    chunk_overlap: int = 150
    dedupe_threshold: float = 0.85
    fetch_delay_s: float = 0.5
    fetch_timeout_s: float = 20.0
    max_concurrent_fetches_per_host: int = 2
    user_agent: str = "synthkit-research/0.1 (+https://github.com/synthkit)"
    query_tournament: TournamentPlan = field(
        default_factory=lambda: TournamentPlan(rounds=8, min_games_per_item=6)
    )

    def validate(self) -> None:
        if not self.categories:
            raise ConfigError("at least one research category is required")
        if self.queries_per_category < 1:
            raise ConfigError("queries_per_category must be at least 1")
        if not 0 < self.deep_fraction <= 1:
            raise ConfigError("deep_fraction must be in (0, 1]")
        if not 0 <= self.dedupe_threshold <= 1:
            raise ConfigError("dedupe_threshold must be in [0, 1]")
        self.query_tournament.validate()

    def active_categories(self) -> list[str]:
        cats = list(self.categories)
        if self.include_news and "news" not in cats:
            cats.append("news")
        return cats


# Evidence categories gathered for every policy. The default set is the
# named collection panels the product surfaces for a policy dossier.
DEFAULT_EVIDENCE_CATEGORIES = [
    "Policy Recommendations",
    "Evidence Collected",
    "Policy Risks",
    "Pros for Policy",
    "Cons for Policy",
    "Academic Sources",
    "Case Studies",
    "Stakeholder Opinions",
    "Expert Opinions",
    "Public Opinions",
    "Historical Context",
    "Ethical Considerations",
    "Long Term Impact",
    "Short Term Impact",
    "Local Perspective",
    "Global Perspective",
]

# Deployments that enumerate more fine grained panels are expected to run
# this many; when the configured set has a different size we proceed but warn.
EXPECTED_EVIDENCE_CATEGORY_COUNT = 22


@dataclass
class PolicyConfig:
    policies_per_subproblem: int = 5
    top_solutions_considered: int = 10
    generations: int = 1
    evidence_categories: list[str] = field(
        default_factory=lambda: list(DEFAULT_EVIDENCE_CATEGORIES)
    )
    evidence_queries_per_category: int = 2
    evidence_results_per_query: int = 4

    def validate(self) -> None:
        if self.policies_per_subproblem < 1:
            raise ConfigError("policies_per_subproblem must be at least 1")
        if self.top_solutions_considered < 1:
            raise ConfigError("top_solutions_considered must be at least 1")
        if self.generations < 0:
            raise ConfigError("policy generations cannot be negative")
        if not self.evidence_categories:
            raise ConfigError("evidence_categories cannot be empty")


@dataclass
class OrchestratorConfig:
    max_repair_rounds: int = 2
    validator_count: int = 3
    compression_target_words: int = 60

    def validate(self) -> None:
        if self.max_repair_rounds < 0:
            raise ConfigError("max_repair_rounds cannot be negative")
        if self.validator_count < 1:
            raise ConfigError("validator_count must be at least 1")


@dataclass
class ProjectConfig:
    """Root config stored with each project."""

    elo: EloConfig = field(default_factory=EloConfig)
    providers: ProviderConfig = field(default_factory=ProviderConfig)
    research: ResearchConfig = field(default_factory=ResearchConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    orchestrator: OrchestratorConfig = field(default_factory=OrchestratorConfig)
    subproblem_count: int = 6
    seed: int = 0

    def validate(self) -> None:
        self.elo.validate()
        self.providers.validate()
        self.research.validate()
        self.evolution.validate()
        self.policy.validate()
        self.orchestrator.validate()
        if self.subproblem_count < 1:
            raise ConfigError("subproblem_count must be at least 1")


def config_to_dict(cfg: Any) -> Any:
    if dataclasses.is_dataclass(cfg) and not isinstance(cfg, type):
        return {
            f.name: config_to_dict(getattr(cfg, f.name))
            for f in dataclasses.fields(cfg)
        }
    if isinstance(cfg, list):
        return [config_to_dict(v) for v in cfg]
    return cfg


def _from_dict(cls: type, data: dict) -> Any:
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        # Field types are strings under deferred annotations; nested config
        # classes are resolved by field name instead.
        target = _NESTED.get(f.name)
        if target is not None and isinstance(value, dict):
            value = _from_dict(target, value)
        kwargs[f.name] = value
    return cls(**kwargs)


_NESTED = {
    "elo": EloConfig,
    "providers": ProviderConfig,
    "research": ResearchConfig,
    "evolution": EvolutionConfig,
    "policy": PolicyConfig,
    "orchestrator": OrchestratorConfig,
    "retry": RetryConfig,
    "tournament": TournamentPlan,
    "query_tournament": TournamentPlan,
    "fast": EndpointConfig,
    "deep": EndpointConfig,
    "search": EndpointConfig,
}


def config_from_dict(data: dict) -> ProjectConfig:
    cfg = _from_dict(ProjectConfig, data)
    cfg.validate()
    return cfg


def apply_overrides(cfg: ProjectConfig, overrides: dict) -> ProjectConfig:
    """Copy of cfg with dotted-path fields replaced.

    Paths address leaf fields ("evolution.generations", "subproblem_count");
    whole sections cannot be replaced. The copy is validated before return.
    """
    out = _from_dict(ProjectConfig, config_to_dict(cfg))
    for path, value in (overrides or {}).items():
        target = out
        *heads, leaf = path.split(".")
        for part in heads:
            target = getattr(target, part, None)
            if not dataclasses.is_dataclass(target):
                raise ConfigError(f"unknown config section in {path!r}")
        if not hasattr(target, leaf):
            raise ConfigError(f"unknown config field: {path!r}")
        if dataclasses.is_dataclass(getattr(target, leaf)):
            raise ConfigError(f"{path!r} names a config section, not a field")
        setattr(target, leaf, value)
    out.validate()
    return out


def load_config(path: str) -> ProjectConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def set_dotted(cfg: ProjectConfig, dotted_key: str, raw_value: str) -> None:
    """Apply an override like evolution.population_size=12 in place.

    Values are parsed as JSON when possible so numbers and booleans work;
    anything unparseable stays a string.
    """
    parts = dotted_key.split(".")
    target: Any = cfg
    for part in parts[:-1]:
        if not hasattr(target, part):
            raise ConfigError(f"unknown config section: {dotted_key}")
        target = getattr(target, part)
    leaf = parts[-1]
    if not hasattr(target, leaf):
        raise ConfigError(f"unknown config key: {dotted_key}")
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    current = getattr(target, leaf)
    if isinstance(current, float) and isinstance(value, int):
        value = float(value)
    setattr(target, leaf, value)


def provider_endpoint(cfg: ProjectConfig, tier: str) -> EndpointConfig:
    if tier == "fast":
        return cfg.providers.fast
    if tier == "deep":
        return cfg.providers.deep
    if tier == "search":
        return cfg.providers.search
    raise ConfigError(f"unknown model tier: {tier}")


def api_key_for(tier: str) -> str | None:
    env = {"fast": FAST_KEY_ENV, "deep": DEEP_KEY_ENV, "search": SEARCH_KEY_ENV}.get(tier)
    if env is None:
        raise ConfigError(f"unknown credential tier: {tier}")
    return os.environ.get(env)
