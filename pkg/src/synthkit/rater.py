"""Coverage judging: how much of each reference recommendation does each
candidate solution include?

A judge model scores every (requirement, solution) pair with a coverage
percentage; scores are persisted for resumable matrix runs and folded into a
threshold table per requirement: how many solutions covered it fully, and how
many covered more than half without being complete.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import prompts
from .model import JudgmentRecord, Requirement
from .orchestrator import _REASK_SUFFIX
from .providers import ModelRequest
from .util import parse_json_block

log = logging.getLogger(__name__)

DEFAULT_JUDGE_ID = "judge-deep"


class RaterError(RuntimeError):
    pass


class JudgmentError(RaterError):
    """One pair could not be judged; matrix runs record it and continue."""


def _extract_percent(text: str) -> int:
    """Pull solutionCoversPercent out of the judge's reply."""
    payload = parse_json_block(text)
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list) or not payload:
        raise ValueError("expected a JSON array holding one judgment object")
    entry = payload[0]
    if not isinstance(entry, dict) or "solutionCoversPercent" not in entry:
        raise ValueError("missing solutionCoversPercent")
    value = entry["solutionCoversPercent"]
    try:
        percent = int(value)
    except (TypeError, ValueError):
        raise ValueError(f"solutionCoversPercent is not a number: {value!r}") from None
    if not 0 <= percent <= 100:
        raise ValueError(f"solutionCoversPercent out of range: {percent}")
    return percent


@dataclass
class RequirementCounts:
    requirement_id: str
    title: str
    count_100: int = 0
    count_partial: int = 0  # strictly > 50 and < 100

    def to_dict(self) -> dict:
        return {
            "requirement_id": self.requirement_id,
            "title": self.title,
            "count_100": self.count_100,
            "count_partial": self.count_partial,
        }


@dataclass
class AggregateTable:
    rows: list[RequirementCounts] = field(default_factory=list)

    @property
    def total_100(self) -> int:
        return sum(r.count_100 for r in self.rows)

    @property
    def total_partial(self) -> int:
        return sum(r.count_partial for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "total_100": self.total_100,
            "total_partial": self.total_partial,
        }

    def render_text(self) -> str:
        """Fixed-width table for terminals and reports."""
        width = max([len("Requirement")] + [len(r.title) for r in self.rows])
        lines = [
            f"{'Requirement'.ljust(width)}  Full (100%)  Partial (>50% & <100%)"
        ]
        for row in self.rows:
            lines.append(
                f"{row.title.ljust(width)}  {str(row.count_100).rjust(11)}"
                f"  {str(row.count_partial).rjust(22)}"
            )
        lines.append(
            f"{'Total'.ljust(width)}  {str(self.total_100).rjust(11)}"
            f"  {str(self.total_partial).rjust(22)}"
        )
        return "\n".join(lines)


def aggregate(
    records: Sequence[JudgmentRecord],
    requirements: Optional[Sequence[Requirement]] = None,
) -> AggregateTable:
    """Fold judgments into per-requirement threshold counts plus totals.

    Row order follows the given requirements (rows with no judgments stay at
    zero); without them, rows appear in first-judgment order titled by id.
    """
    if not records:
        raise RaterError("no judgment records to aggregate")
    rows: dict[str, RequirementCounts] = {}
    if requirements is not None:
        for req in requirements:
            rows[req.id] = RequirementCounts(requirement_id=req.id, title=req.title)
    for rec in records:
        if rec.requirement_id not in rows:
            rows[rec.requirement_id] = RequirementCounts(
                requirement_id=rec.requirement_id, title=rec.requirement_id
            )
        counts = rows[rec.requirement_id]
        if rec.coverage_percent == 100:
            counts.count_100 += 1
        elif 50 < rec.coverage_percent < 100:
            counts.count_partial += 1
    return AggregateTable(rows=list(rows.values()))


class Rater:
    """Judges requirement/solution pairs with a stable system prompt."""

    def __init__(self, hub, store=None, judge_id: str = DEFAULT_JUDGE_ID, tier: str = "deep"):
        self.hub = hub
        self.store = store
        self.judge_id = judge_id
        self.tier = tier
        self.failures: list[dict] = []

    # ------------------------------------------------------------- one pair

    def judge_pair(self, requirement: Requirement, subject_id: str, solution_text: str) -> JudgmentRecord:
        if not requirement.text.strip():
            raise RaterError(f"requirement {requirement.id} has no text")
        if not solution_text.strip():
            raise RaterError(f"solution {subject_id} has no text")
        percent, raw = self._ask(requirement, subject_id, solution_text)
        return self._record(requirement.id, subject_id, percent, raw)

    def _ask(self, requirement: Requirement, subject_id: str, solution_text: str) -> tuple[int, str]:
        """One model call plus at most one re-ask on an unusable reply."""
        rendered = prompts.render(
            "judge",
            requirement_title=requirement.title,
            requirement_text=requirement.text,
            solution_text=solution_text,
        )

        def ask(extra: str) -> str:
            request = ModelRequest(
                tier=self.tier,
                system_message=rendered.system,
                user_message=rendered.user + extra,
                temperature=0.0,
                max_output_tokens=512,
                template=rendered.template,
                slots=rendered.slots,
            )
            return self.hub.complete(request).text

        raw = ask("")
        try:
            return _extract_percent(raw), raw
        except ValueError as first_error:
            log.info(
                "judge re-ask for %s vs %s: %s", requirement.id, subject_id, first_error
            )
            raw = ask(_REASK_SUFFIX.format(error=first_error))
            try:
                return _extract_percent(raw), raw
            except ValueError as second_error:
                raise JudgmentError(
                    f"judgment unusable for {requirement.id} vs {subject_id}:"
                    f" {second_error}"
                ) from second_error

    def _record(self, requirement_id: str, subject_id: str, percent: int, raw: str) -> JudgmentRecord:
        if self.store is not None:
            return self.store.new_judgment(
                requirement_id, subject_id, percent, self.judge_id, raw_output=raw
            )
        return JudgmentRecord(
            id=f"{requirement_id}:{subject_id}",
            requirement_id=requirement_id,
            subject_id=subject_id,
            coverage_percent=percent,
            judge_id=self.judge_id,
            raw_output=raw,
        )

    # ------------------------------------------------------------ the matrix

    def run_matrix(
        self,
        requirements: Sequence[Requirement],
        subjects: Sequence[tuple[str, str]],
        max_failure_fraction: float = 0.1,
    ) -> list[JudgmentRecord]:
        """Judge every (requirement, subject) pair; subjects are (id, text).

        Already-persisted judgments by the same judge are reused, so an
        interrupted run picks up where it stopped. Per-pair failures are
        recorded and skipped; the matrix fails when more than
        max_failure_fraction of all pairs are unusable.
        """
        if not requirements:
            raise RaterError("requirements must be non-empty")
        if not subjects:
            raise RaterError("subjects must be non-empty")
        pairs = [
            (req, subject_id, text)
            for req in requirements
            for subject_id, text in subjects
        ]
        existing: dict[int, JudgmentRecord] = {}
        todo = []
        for i, (req, subject_id, text) in enumerate(pairs):
            found = (
                self.store.find_judgment(req.id, subject_id, self.judge_id)
                if self.store is not None
                else None
            )
            if found is not None:
                existing[i] = found
            else:
                todo.append((i, req, subject_id, text))

        def call(job):
            _, req, subject_id, text = job
            try:
                return self._ask(req, subject_id, text)
            except (RaterError, ValueError) as exc:
                return exc

        outcomes = self.hub.map(call, todo)

        self.failures = []
        records: dict[int, JudgmentRecord] = dict(existing)
        for (i, req, subject_id, _), outcome in zip(todo, outcomes):
            if isinstance(outcome, Exception):
                self.failures.append(
                    {
                        "requirement_id": req.id,
                        "subject_id": subject_id,
                        "error": str(outcome),
                    }
                )
                continue
            percent, raw = outcome
            records[i] = self._record(req.id, subject_id, percent, raw)
        total = len(pairs)
        if len(self.failures) > max_failure_fraction * total:
            raise RaterError(
                f"{len(self.failures)} of {total} judgments failed;"
                f" aborting the matrix"
            )
        if self.failures:
            log.warning("matrix finished with %d failed pairs", len(self.failures))
        return [records[i] for i in sorted(records)]


# ---------------------------------------------------------------------------
# input files


def load_items(path: str) -> list[tuple[str, str]]:
    """Read a list of (title, text) items for judging.

    JSON files hold an array of strings or of {"title", "text"} objects;
    anything else is read as plain text with one item per non-empty line.
    Untitled items are numbered.
    """
    with open(path, "r", encoding="utf-8") as fh:
        body = fh.read()
    items: list[tuple[str, str]] = []
    if os.path.splitext(path)[1].lower() == ".json":
        data = json.loads(body)
        if not isinstance(data, list):
            raise RaterError(f"{path}: expected a JSON array")
        for i, entry in enumerate(data, start=1):
            if isinstance(entry, str):
                items.append((f"Item {i}", entry))
            elif isinstance(entry, dict) and str(entry.get("text", "")).strip():
                items.append((str(entry.get("title") or f"Item {i}"), str(entry["text"])))
            else:
                raise RaterError(f"{path}: entry {i} has no usable text")
    else:
        for i, line in enumerate(
            (l.strip() for l in body.splitlines() if l.strip()), start=1
        ):
            items.append((f"Item {i}", line))
    if not items:
        raise RaterError(f"{path}: no items found")
    return items


def requirements_from_file(path: str) -> list[Requirement]:
    return [
        Requirement(id=f"req-{i:03d}", title=title, text=text)
        for i, (title, text) in enumerate(load_items(path), start=1)
    ]


def subjects_from_file(path: str) -> list[tuple[str, str]]:
    return [
        (f"cand-{i:03d}", text)
        for i, (_, text) in enumerate(load_items(path), start=1)
    ]
