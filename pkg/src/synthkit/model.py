"""Domain objects shared across the pipeline.

Everything here is a plain dataclass with an explicit to_dict/from_dict pair.
Serialization is hand written rather than asdict() so the wire shape is a
stable contract independent of field order changes in code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

VOTE_OUTCOMES = ("One", "Two", "Neither")

# How a solution entered the population. Immigrants are freshly web-sourced
# entrants of a later generation, so they carry web_sourced too.
ORIGIN_WEB = "web_sourced"
ORIGIN_SEEDED = "seeded"
ORIGIN_CROSSOVER = "crossover"
ORIGIN_MUTATION = "mutation"
ORIGINS = (ORIGIN_WEB, ORIGIN_SEEDED, ORIGIN_CROSSOVER, ORIGIN_MUTATION)


class ModelError(ValueError):
    """Raised when a domain object violates one of its invariants."""


@dataclass
class EloState:
    rating: float = 1000.0
    games_played: int = 0

    def to_dict(self) -> dict:
        return {"rating": self.rating, "games_played": self.games_played}

    @classmethod
    def from_dict(cls, d: dict) -> "EloState":
        return cls(rating=d["rating"], games_played=d["games_played"])


@dataclass
class SourceRef:
    """Pointer to a web page an item was derived from."""

    url: str
    title: str = ""
    retrieved_at: str = ""
    query_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "title": self.title,
            "retrieved_at": self.retrieved_at,
            "query_id": self.query_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SourceRef":
        return cls(
            url=d["url"],
            title=d.get("title", ""),
            retrieved_at=d.get("retrieved_at", ""),
            query_id=d.get("query_id"),
        )


@dataclass
class ProblemStatement:
    text: str
    ranking_guidance: str = ""

    def to_dict(self) -> dict:
        return {"text": self.text, "ranking_guidance": self.ranking_guidance}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemStatement":
        return cls(text=d["text"], ranking_guidance=d.get("ranking_guidance", ""))


@dataclass
class AffectedEntity:
    name: str
    negative_effects: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "negative_effects": list(self.negative_effects)}

    @classmethod
    def from_dict(cls, d: dict) -> "AffectedEntity":
        return cls(name=d["name"], negative_effects=list(d.get("negative_effects", [])))


@dataclass
class SubProblem:
    id: str
    title: str
    description: str
    elo: EloState = field(default_factory=EloState)
    active: bool = True
    affected_entities: list[AffectedEntity] = field(default_factory=list)
    sources: list[SourceRef] = field(default_factory=list)

    def text(self) -> str:
        return f"{self.title}\n\n{self.description}"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "elo": self.elo.to_dict(),
            "active": self.active,
            "affected_entities": [e.to_dict() for e in self.affected_entities],
            "sources": [s.to_dict() for s in self.sources],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubProblem":
        return cls(
            id=d["id"],
            title=d["title"],
            description=d["description"],
            elo=EloState.from_dict(d["elo"]),
            active=d.get("active", True),
            affected_entities=[
                AffectedEntity.from_dict(e) for e in d.get("affected_entities", [])
            ],
            sources=[SourceRef.from_dict(s) for s in d.get("sources", [])],
        )


@dataclass
class Solution:
    id: str
    subproblem_id: str
    title: str
    description: str
    main_benefit: str = ""
    main_obstacle: str = ""
    pros: list[str] = field(default_factory=list)
    cons: list[str] = field(default_factory=list)
    elo: EloState = field(default_factory=EloState)
    generation_index: int = 0
    parent_ids: list[str] = field(default_factory=list)
    origin: str = ORIGIN_WEB
    viable: bool = True
    sources: list[SourceRef] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.origin not in ORIGINS:
            raise ModelError(f"unknown solution origin: {self.origin}")
        arity = {ORIGIN_WEB: 0, ORIGIN_SEEDED: 0, ORIGIN_CROSSOVER: 2, ORIGIN_MUTATION: 1}
        if len(self.parent_ids) != arity[self.origin]:
            raise ModelError(
                f"{self.origin} solutions need exactly {arity[self.origin]} parents,"
                f" got {len(self.parent_ids)}"
            )
        if not self.title.strip() or not self.description.strip():
            raise ModelError("solution title and description must be non-empty")

    def text(self) -> str:
        return f"{self.title}\n\n{self.description}"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "subproblem_id": self.subproblem_id,
            "title": self.title,
            "description": self.description,
            "main_benefit": self.main_benefit,
            "main_obstacle": self.main_obstacle,
            "pros": list(self.pros),
            "cons": list(self.cons),
            "elo": self.elo.to_dict(),
            "generation_index": self.generation_index,
            "parent_ids": list(self.parent_ids),
            "origin": self.origin,
            "viable": self.viable,
            "sources": [s.to_dict() for s in self.sources],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        return cls(
            id=d["id"],
            subproblem_id=d["subproblem_id"],
            title=d["title"],
            description=d["description"],
            main_benefit=d.get("main_benefit", ""),
            main_obstacle=d.get("main_obstacle", ""),
            pros=list(d.get("pros", [])),
            cons=list(d.get("cons", [])),
            elo=EloState.from_dict(d["elo"]),
            generation_index=d["generation_index"],
            parent_ids=list(d.get("parent_ids", [])),
            origin=d["origin"],
            viable=d.get("viable", True),
            sources=[SourceRef.from_dict(s) for s in d.get("sources", [])],
        )


@dataclass
class EvidenceItem:
    category: str
    summary: str
    bullets: list[str] = field(default_factory=list)
    source: Optional[SourceRef] = None

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "summary": self.summary,
            "bullets": list(self.bullets),
            "source": self.source.to_dict() if self.source else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceItem":
        src = d.get("source")
        return cls(
            category=d["category"],
            summary=d["summary"],
            bullets=list(d.get("bullets", [])),
            source=SourceRef.from_dict(src) if src else None,
        )


@dataclass
class Policy:
    id: str
    subproblem_id: str
    title: str
    description: str
    source_solution_ids: list[str] = field(default_factory=list)
    evidence: list[EvidenceItem] = field(default_factory=list)
    elo: EloState = field(default_factory=EloState)
    generation_index: int = 0
    parent_ids: list[str] = field(default_factory=list)
    origin: str = ORIGIN_SEEDED

    def text(self) -> str:
        return f"{self.title}\n\n{self.description}"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "subproblem_id": self.subproblem_id,
            "title": self.title,
            "description": self.description,
            "source_solution_ids": list(self.source_solution_ids),
            "evidence": [e.to_dict() for e in self.evidence],
            "elo": self.elo.to_dict(),
            "generation_index": self.generation_index,
            "parent_ids": list(self.parent_ids),
            "origin": self.origin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Policy":
        return cls(
            id=d["id"],
            subproblem_id=d["subproblem_id"],
            title=d["title"],
            description=d["description"],
            source_solution_ids=list(d.get("source_solution_ids", [])),
            evidence=[EvidenceItem.from_dict(e) for e in d.get("evidence", [])],
            elo=EloState.from_dict(d["elo"]),
            generation_index=d.get("generation_index", 0),
            parent_ids=list(d.get("parent_ids", [])),
            origin=d.get("origin", ORIGIN_SEEDED),
        )


@dataclass
class Comparison:
    """One pairwise vote, recorded after its rating update was applied."""

    tournament_id: str
    item_a: str
    item_b: str
    outcome: str
    voter_kind: str  # model | human | mock
    voter_id: str
    timestamp: str = ""

    def __post_init__(self) -> None:
        if self.outcome not in VOTE_OUTCOMES:
            raise ModelError(f"outcome must be one of {VOTE_OUTCOMES}, got {self.outcome!r}")
        if self.item_a == self.item_b:
            raise ModelError("an item cannot be compared against itself")

    def to_dict(self) -> dict:
        return {
            "tournament_id": self.tournament_id,
            "item_a": self.item_a,
            "item_b": self.item_b,
            "outcome": self.outcome,
            "voter_kind": self.voter_kind,
            "voter_id": self.voter_id,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Comparison":
        return cls(
            tournament_id=d["tournament_id"],
            item_a=d["item_a"],
            item_b=d["item_b"],
            outcome=d["outcome"],
            voter_kind=d["voter_kind"],
            voter_id=d["voter_id"],
            timestamp=d.get("timestamp", ""),
        )


@dataclass
class SearchQuery:
    id: str
    text: str
    category: str
    purpose: str = ""
    elo: EloState = field(default_factory=EloState)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "category": self.category,
            "purpose": self.purpose,
            "elo": self.elo.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchQuery":
        return cls(
            id=d["id"],
            text=d["text"],
            category=d["category"],
            purpose=d.get("purpose", ""),
            elo=EloState.from_dict(d["elo"]),
        )


@dataclass
class Requirement:
    """One requirement a candidate text is judged against."""

    id: str
    title: str
    text: str

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "text": self.text}

    @classmethod
    def from_dict(cls, d: dict) -> "Requirement":
        return cls(id=d["id"], title=d["title"], text=d["text"])


@dataclass
class JudgmentRecord:
    id: str
    requirement_id: str
    subject_id: str
    coverage_percent: int
    judge_id: str
    raw_output: str = ""

    def __post_init__(self) -> None:
        if not 0 <= self.coverage_percent <= 100:
            raise ModelError(
                f"coverage_percent must be within [0, 100], got {self.coverage_percent}"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "requirement_id": self.requirement_id,
            "subject_id": self.subject_id,
            "coverage_percent": self.coverage_percent,
            "judge_id": self.judge_id,
            "raw_output": self.raw_output,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JudgmentRecord":
        return cls(
            id=d["id"],
            requirement_id=d["requirement_id"],
            subject_id=d["subject_id"],
            coverage_percent=d["coverage_percent"],
            judge_id=d["judge_id"],
            raw_output=d.get("raw_output", ""),
        )


@dataclass
class GenerationReport:
    """Snapshot of one generation after its tournament settled."""

    kind: str  # solution | policy
    subproblem_id: str
    index: int
    member_ids: list[str]
    ratings: dict[str, float]
    births: dict[str, int] = field(default_factory=dict)  # origin -> count
    deaths: list[dict] = field(default_factory=list)  # {id, reason}

    def best_rating(self) -> float:
        return max(self.ratings.values()) if self.ratings else 0.0

    def mean_rating(self) -> float:
        return sum(self.ratings.values()) / len(self.ratings) if self.ratings else 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "subproblem_id": self.subproblem_id,
            "index": self.index,
            "member_ids": list(self.member_ids),
            "ratings": dict(self.ratings),
            "births": dict(self.births),
            "deaths": list(self.deaths),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationReport":
        return cls(
            kind=d["kind"],
            subproblem_id=d["subproblem_id"],
            index=d["index"],
            member_ids=list(d["member_ids"]),
            ratings={k: float(v) for k, v in d["ratings"].items()},
            births={k: int(v) for k, v in d.get("births", {}).items()},
            deaths=list(d.get("deaths", [])),
        )


def lineage_edges(solutions: list[Solution]) -> list[tuple[str, str]]:
    """(parent_id, child_id) edges over a set of solutions."""
    ids = {s.id for s in solutions}
    edges = []
    for sol in solutions:
        for parent in sol.parent_ids:
            if parent in ids:
                edges.append((parent, sol.id))
    return edges


def assert_lineage_acyclic(solutions: list[Solution]) -> None:
    """Every parent must belong to a strictly earlier generation.

    That ordering makes the lineage graph trivially acyclic; violating it is
    a bug in whichever operator created the child.
    """
    by_id = {s.id: s for s in solutions}
    for sol in solutions:
        for parent_id in sol.parent_ids:
            parent = by_id.get(parent_id)
            if parent is None:
                continue
            if parent.generation_index >= sol.generation_index:
                raise ModelError(
                    f"{sol.id} (gen {sol.generation_index}) has parent {parent.id}"
                    f" from generation {parent.generation_index}"
                )


def sort_by_rating(items: list[Any]) -> list[Any]:
    """Rating descending, id ascending on ties. The one canonical ordering."""
    return sorted(items, key=lambda it: (-it.elo.rating, it.id))
