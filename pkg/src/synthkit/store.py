"""Event-sourced project store.

The append-only events.log is the source of truth; the .col documents are
deterministic snapshots of state derived from it. Opening a store replays
the log, so a crash can never lose more than the event being written, and
replaying the same log always reproduces byte-identical documents.

Layout inside a project directory:

    project.meta    statement, config, queries, sources, tournaments, stages
    problems.col    sub-problems
    solutions.col   solutions plus per-generation reports
    policies.col    policies plus per-generation reports
    judgments.col   requirement coverage judgments
    events.log      append-only JSONL, one event per line
    runs/           workflow checkpoints (scratch, not part of project state)

One writer at a time: writers take a lock file; locks from dead processes
are reclaimed automatically.
"""

from __future__ import annotations

import json
import os
from typing import Any, Iterable, Optional

from .config import ProjectConfig, config_from_dict, config_to_dict
from .model import (
    AffectedEntity,
    Comparison,
    EloState,
    GenerationReport,
    JudgmentRecord,
    Policy,
    ProblemStatement,
    SearchQuery,
    Solution,
    SourceRef,
    SubProblem,
)
from .util import atomic_write, dump_json, dump_json_line, normalize_timestamps, now_rfc3339

DOC_FILES = ("project.meta", "problems.col", "solutions.col", "policies.col", "judgments.col")
LOG_FILE = "events.log"
LOCK_FILE = ".lock"
RUNS_DIR = "runs"

SCHEMA_VERSION = 1


class StoreError(RuntimeError):
    pass


class StoreLockError(StoreError):
    pass


class ReplayError(StoreError):
    """Raised when events.log cannot be replayed; message names the spot."""


class _State:
    """Everything derivable from the event log."""

    def __init__(self) -> None:
        self.project_id: str = ""
        self.created_at: str = ""
        self.statement: ProblemStatement = ProblemStatement(text="")
        self.config_dict: dict = {}
        self.subproblems: dict[str, SubProblem] = {}
        self.solutions: dict[str, Solution] = {}
        self.policies: dict[str, Policy] = {}
        self.judgments: dict[str, JudgmentRecord] = {}
        self.queries: dict[str, SearchQuery] = {}
        self.sources: dict[str, SourceRef] = {}
        self.reports: list[GenerationReport] = []
        self.stages_done: dict[str, dict] = {}
        self.tournaments: dict[str, dict] = {}
        # tournament_id -> {pair_index, ...} for double-submit detection
        self.voted_pairs: dict[str, set[int]] = {}
        self.comparisons: list[dict] = []  # raw payloads, in arrival order

    # Items that carry an EloState, addressable by id prefix.
    def find_rated_item(self, item_id: str) -> Any:
        for table in (self.subproblems, self.solutions, self.policies, self.queries):
            if item_id in table:
                return table[item_id]
        return None


def _apply_event(state: _State, kind: str, payload: dict) -> None:
    """The single transition function used for both live writes and replay."""
    if kind == "project_created":
        state.project_id = payload["project_id"]
        state.created_at = payload["created_at"]
        state.statement = ProblemStatement.from_dict(payload["statement"])
        state.config_dict = payload["config"]
    elif kind == "subproblem_added":
        item = SubProblem.from_dict(payload["item"])
        state.subproblems[item.id] = item
    elif kind == "subproblem_active_set":
        state.subproblems[payload["id"]].active = payload["active"]
    elif kind == "solution_added" or kind == "solution_updated":
        item = Solution.from_dict(payload["item"])
        state.solutions[item.id] = item
    elif kind == "policy_added" or kind == "policy_updated":
        item = Policy.from_dict(payload["item"])
        state.policies[item.id] = item
    elif kind == "judgment_added":
        rec = JudgmentRecord.from_dict(payload["item"])
        state.judgments[rec.id] = rec
    elif kind == "query_added":
        q = SearchQuery.from_dict(payload["item"])
        state.queries[q.id] = q
    elif kind == "source_added":
        ref = SourceRef.from_dict(payload["item"])
        state.sources.setdefault(ref.url, ref)
    elif kind == "comparison_recorded":
        state.comparisons.append(payload)
        for item_id, elo in payload["ratings_after"].items():
            item = state.find_rated_item(item_id)
            if item is not None:
                item.elo = EloState.from_dict(elo)
        pair_index = payload.get("pair_index")
        if pair_index is not None:
            tid = payload["comparison"]["tournament_id"]
            state.voted_pairs.setdefault(tid, set()).add(pair_index)
    elif kind == "tournament_opened":
        t = payload["tournament"]
        state.tournaments[t["id"]] = t
    elif kind == "tournament_closed":
        if payload["id"] in state.tournaments:
            state.tournaments[payload["id"]]["open"] = False
    elif kind == "generation_recorded":
        state.reports.append(GenerationReport.from_dict(payload["report"]))
    elif kind == "stage_done":
        state.stages_done[payload["stage"]] = payload.get("info", {})
    else:
        raise ReplayError(f"unknown event kind: {kind}")


def replay_log(path: str) -> tuple[_State, int]:
    """Rebuild state from events.log. Returns (state, last_seq).

    Any malformed line aborts with an error naming the line number and byte
    offset so the damage can be inspected by hand.
    """
    state = _State()
    last_seq = 0
    offset = 0
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line_start = offset
            offset += len(raw)
            text = raw.decode("utf-8", errors="replace").strip()
            if not text:
                continue
            if not raw.endswith(b"\n"):
                raise ReplayError(
                    f"truncated event at line {lineno}, byte offset {line_start}"
                )
            try:
                event = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ReplayError(
                    f"corrupt event at line {lineno}, byte offset {line_start}: {exc}"
                ) from exc
            seq = event.get("seq")
            if seq != last_seq + 1:
                raise ReplayError(
                    f"sequence gap at line {lineno}, byte offset {line_start}:"
                    f" expected seq {last_seq + 1}, found {seq}"
                )
            try:
                _apply_event(state, event["kind"], event["payload"])
            except ReplayError:
                raise
            except Exception as exc:
                raise ReplayError(
                    f"unreplayable event at line {lineno}, byte offset {line_start}: {exc}"
                ) from exc
            last_seq = seq
    return state, last_seq


class _Lock:
    def __init__(self, path: str):
        self.path = path
        self.held = False

    def acquire(self) -> None:
        while True:
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                owner = self._owner_pid()
                if owner is not None and not _pid_alive(owner):
                    # Lock left behind by a dead process; reclaim it.
                    try:
                        os.unlink(self.path)
                    except FileNotFoundError:
                        pass
                    continue
                raise StoreLockError(
                    f"project is locked by pid {owner} ({self.path});"
                    " close the other writer first"
                ) from None
            with os.fdopen(fd, "w") as fh:
                fh.write(str(os.getpid()))
            self.held = True
            return

    def _owner_pid(self) -> Optional[int]:
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                return int(fh.read().strip() or "0")
        except (OSError, ValueError):
            return None

    def release(self) -> None:
        if self.held:
            try:
                os.unlink(self.path)
            except FileNotFoundError:
                pass
            self.held = False


def _pid_alive(pid: int) -> bool:
    if pid <= 0:
        return False
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


def _id_number(item_id: str) -> int:
    try:
        return int(item_id.rsplit("-", 1)[-1])
    except ValueError:
        return 0


class ProjectStore:
    """Handle on one project directory. Use as a context manager when writing."""

    def __init__(self, root: str, state: _State, seq: int, lock: Optional[_Lock], read_only: bool):
        self.root = root
        self._state = state
        self._seq = seq
        self._lock = lock
        self.read_only = read_only
        self._log_fh = None
        if not read_only:
            self._log_fh = open(os.path.join(root, LOG_FILE), "a", encoding="utf-8")

    # ------------------------------------------------------------------ setup

    @classmethod
    def create(
        cls,
        root: str,
        statement: ProblemStatement,
        config: Optional[ProjectConfig] = None,
        project_id: Optional[str] = None,
    ) -> "ProjectStore":
        if not statement.text.strip():
            raise StoreError("a project needs a non-empty problem statement")
        config = config or ProjectConfig()
        config.validate()
        os.makedirs(root, exist_ok=True)
        if os.path.exists(os.path.join(root, LOG_FILE)):
            raise StoreError(f"project already exists at {root}")
        lock = _Lock(os.path.join(root, LOCK_FILE))
        lock.acquire()
        store = cls(root, _State(), 0, lock, read_only=False)
        if project_id is None:
            project_id = "proj-" + os.path.basename(os.path.abspath(root))
        store._append(
            "project_created",
            {
                "project_id": project_id,
                "created_at": now_rfc3339(),
                "statement": statement.to_dict(),
                "config": config_to_dict(config),
                "schema_version": SCHEMA_VERSION,
            },
        )
        store.flush()
        return store

    @classmethod
    def open(cls, root: str, read_only: bool = False) -> "ProjectStore":
        log_path = os.path.join(root, LOG_FILE)
        if not os.path.exists(log_path):
            raise StoreError(f"no project at {root}")
        lock = None
        if not read_only:
            lock = _Lock(os.path.join(root, LOCK_FILE))
            lock.acquire()
        try:
            state, seq = replay_log(log_path)
        except Exception:
            if lock:
                lock.release()
            raise
        return cls(root, state, seq, lock, read_only)

    def close(self) -> None:
        if not self.read_only:
            self.flush()
        if self._log_fh:
            self._log_fh.close()
            self._log_fh = None
        if self._lock:
            self._lock.release()
            self._lock = None

    def __enter__(self) -> "ProjectStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # ------------------------------------------------------------- event core

    def _append(self, kind: str, payload: dict) -> None:
        if self.read_only:
            raise StoreError("store was opened read-only")
        self._seq += 1
        event = {"seq": self._seq, "ts": now_rfc3339(), "kind": kind, "payload": payload}
        line = dump_json_line(event)
        self._log_fh.write(line + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())
        _apply_event(self._state, kind, payload)

    def next_id(self, prefix: str) -> str:
        """Monotonic content-free id. Derived from what exists, never reused."""
        tables: Iterable[dict] = {
            "sp": (self._state.subproblems,),
            "sol": (self._state.solutions,),
            "pol": (self._state.policies,),
            "jr": (self._state.judgments,),
            "t": (self._state.tournaments,),
            "q": (self._state.queries,),
        }.get(prefix, ())
        highest = 0
        for table in tables:
            for item_id in table:
                highest = max(highest, _id_number(item_id))
        return f"{prefix}-{highest + 1:05d}"

    # ------------------------------------------------------------------- meta

    @property
    def project_id(self) -> str:
        return self._state.project_id

    @property
    def created_at(self) -> str:
        return self._state.created_at

    @property
    def statement(self) -> ProblemStatement:
        return self._state.statement

    def config(self) -> ProjectConfig:
        return config_from_dict(self._state.config_dict)

    # ------------------------------------------------------------ sub-problems

    def new_subproblem(
        self,
        title: str,
        description: str,
        affected_entities: Iterable[AffectedEntity] = (),
        sources: Iterable[SourceRef] = (),
        elo: Optional[EloState] = None,
    ) -> SubProblem:
        sp = SubProblem(
            id=self.next_id("sp"),
            title=title,
            description=description,
            elo=elo or EloState(rating=self.config().elo.initial_rating),
            affected_entities=list(affected_entities),
            sources=list(sources),
        )
        self._append("subproblem_added", {"item": sp.to_dict()})
        return self._state.subproblems[sp.id]

    def set_subproblem_active(self, subproblem_id: str, active: bool) -> SubProblem:
        if subproblem_id not in self._state.subproblems:
            raise StoreError(f"unknown sub-problem: {subproblem_id}")
        self._append("subproblem_active_set", {"id": subproblem_id, "active": active})
        return self._state.subproblems[subproblem_id]

    def subproblems(self, active_only: bool = False) -> list[SubProblem]:
        items = sorted(self._state.subproblems.values(), key=lambda s: s.id)
        if active_only:
            items = [s for s in items if s.active]
        return items

    def get_subproblem(self, subproblem_id: str) -> SubProblem:
        try:
            return self._state.subproblems[subproblem_id]
        except KeyError:
            raise StoreError(f"unknown sub-problem: {subproblem_id}") from None

    # -------------------------------------------------------------- solutions

    def new_solution(self, **fields) -> Solution:
        sol = Solution(id=self.next_id("sol"), **fields)
        self._append("solution_added", {"item": sol.to_dict()})
        return self._state.solutions[sol.id]

    def update_solution(self, sol: Solution) -> None:
        if sol.id not in self._state.solutions:
            raise StoreError(f"unknown solution: {sol.id}")
        self._append("solution_updated", {"item": sol.to_dict()})

    def solutions(
        self,
        subproblem_id: Optional[str] = None,
        generation: Optional[int] = None,
    ) -> list[Solution]:
        items = sorted(self._state.solutions.values(), key=lambda s: _id_number(s.id))
        if subproblem_id is not None:
            items = [s for s in items if s.subproblem_id == subproblem_id]
        if generation is not None:
            member_ids = None
            for rep in self.generation_reports("solution", subproblem_id):
                if rep.index == generation:
                    member_ids = set(rep.member_ids)
                    break
            if member_ids is None:
                items = [s for s in items if s.generation_index == generation]
            else:
                items = [s for s in items if s.id in member_ids]
        return items

    def get_solution(self, solution_id: str) -> Solution:
        try:
            return self._state.solutions[solution_id]
        except KeyError:
            raise StoreError(f"unknown solution: {solution_id}") from None

    # --------------------------------------------------------------- policies

    def new_policy(self, **fields) -> Policy:
        pol = Policy(id=self.next_id("pol"), **fields)
        self._append("policy_added", {"item": pol.to_dict()})
        return self._state.policies[pol.id]

    def update_policy(self, pol: Policy) -> None:
        if pol.id not in self._state.policies:
            raise StoreError(f"unknown policy: {pol.id}")
        self._append("policy_updated", {"item": pol.to_dict()})

    def policies(self, subproblem_id: Optional[str] = None) -> list[Policy]:
        items = sorted(self._state.policies.values(), key=lambda p: _id_number(p.id))
        if subproblem_id is not None:
            items = [p for p in items if p.subproblem_id == subproblem_id]
        return items

    def get_policy(self, policy_id: str) -> Policy:
        try:
            return self._state.policies[policy_id]
        except KeyError:
            raise StoreError(f"unknown policy: {policy_id}") from None

    # -------------------------------------------------------------- judgments

    def new_judgment(
        self,
        requirement_id: str,
        subject_id: str,
        coverage_percent: int,
        judge_id: str,
        raw_output: str = "",
    ) -> JudgmentRecord:
        rec = JudgmentRecord(
            id=self.next_id("jr"),
            requirement_id=requirement_id,
            subject_id=subject_id,
            coverage_percent=coverage_percent,
            judge_id=judge_id,
            raw_output=raw_output,
        )
        self._append("judgment_added", {"item": rec.to_dict()})
        return self._state.judgments[rec.id]

    def judgments(self) -> list[JudgmentRecord]:
        return sorted(self._state.judgments.values(), key=lambda j: _id_number(j.id))

    def find_judgment(
        self, requirement_id: str, subject_id: str, judge_id: str
    ) -> Optional[JudgmentRecord]:
        for rec in self._state.judgments.values():
            if (
                rec.requirement_id == requirement_id
                and rec.subject_id == subject_id
                and rec.judge_id == judge_id
            ):
                return rec
        return None

    # ------------------------------------------------------- queries / sources

    def add_query(self, query: SearchQuery) -> None:
        self._append("query_added", {"item": query.to_dict()})

    def queries(self) -> list[SearchQuery]:
        return sorted(self._state.queries.values(), key=lambda q: q.id)

    def add_source(self, ref: SourceRef) -> None:
        if ref.url in self._state.sources:
            return
        self._append("source_added", {"item": ref.to_dict()})

    def sources(self) -> list[SourceRef]:
        return sorted(self._state.sources.values(), key=lambda s: s.url)

    # ------------------------------------------------------------ tournaments

    def record_comparison(
        self,
        comparison: Comparison,
        rated_items: Iterable[Any],
        pair_index: Optional[int] = None,
    ) -> None:
        """Persist one vote together with the post-update ratings.

        Ratings land in the event rather than being recomputed on replay, so
        replay does not depend on rating arithmetic.
        """
        payload = {
            "comparison": comparison.to_dict(),
            "ratings_after": {it.id: it.elo.to_dict() for it in rated_items},
        }
        if pair_index is not None:
            payload["pair_index"] = pair_index
        self._append("comparison_recorded", payload)

    def comparisons(self, tournament_id: Optional[str] = None) -> list[dict]:
        rows = self._state.comparisons
        if tournament_id is not None:
            rows = [r for r in rows if r["comparison"]["tournament_id"] == tournament_id]
        return list(rows)

    def open_tournament(self, tournament: dict) -> None:
        self._append("tournament_opened", {"tournament": tournament})

    def close_tournament(self, tournament_id: str) -> None:
        self._append("tournament_closed", {"id": tournament_id})

    def tournaments(self) -> dict[str, dict]:
        return dict(self._state.tournaments)

    def voted_pair_indexes(self, tournament_id: str) -> set[int]:
        return set(self._state.voted_pairs.get(tournament_id, set()))

    # ------------------------------------------------------------ generations

    def record_generation(self, report: GenerationReport) -> None:
        self._append("generation_recorded", {"report": report.to_dict()})

    def generation_reports(
        self, kind: str, subproblem_id: Optional[str] = None
    ) -> list[GenerationReport]:
        reps = [r for r in self._state.reports if r.kind == kind]
        if subproblem_id is not None:
            reps = [r for r in reps if r.subproblem_id == subproblem_id]
        return sorted(reps, key=lambda r: (r.subproblem_id, r.index))

    # ----------------------------------------------------------------- stages

    def mark_stage_done(self, stage: str, info: Optional[dict] = None) -> None:
        self._append("stage_done", {"stage": stage, "info": info or {}})

    def stage_done(self, stage: str) -> bool:
        return stage in self._state.stages_done

    def stages_done(self) -> dict[str, dict]:
        return dict(self._state.stages_done)

    # -------------------------------------------------------------- documents

    def _meta_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "project_id": self._state.project_id,
            "created_at": self._state.created_at,
            "statement": self._state.statement.to_dict(),
            "config": self._state.config_dict,
            "queries": [q.to_dict() for q in self.queries()],
            "sources": [s.to_dict() for s in self.sources()],
            "tournaments": [
                self._state.tournaments[k] for k in sorted(self._state.tournaments)
            ],
            "stages_done": self._state.stages_done,
        }

    def _docs(self) -> dict[str, dict]:
        return {
            "project.meta": self._meta_doc(),
            "problems.col": {
                "subproblems": [s.to_dict() for s in self.subproblems()],
            },
            "solutions.col": {
                "solutions": [s.to_dict() for s in self.solutions()],
                "generations": [
                    r.to_dict() for r in self.generation_reports("solution")
                ],
            },
            "policies.col": {
                "policies": [p.to_dict() for p in self.policies()],
                "generations": [r.to_dict() for r in self.generation_reports("policy")],
            },
            "judgments.col": {
                "judgments": [j.to_dict() for j in self.judgments()],
            },
        }

    def flush(self) -> None:
        """Rewrite every collection document from current state."""
        for name, doc in self._docs().items():
            atomic_write(os.path.join(self.root, name), dump_json(doc))

    def export_tournament(self, tournament_id: str) -> dict:
        """Standalone document for one tournament's votes, oldest first."""
        rows = self.comparisons(tournament_id)
        if not rows and tournament_id not in self._state.tournaments:
            raise StoreError(f"unknown tournament: {tournament_id}")
        return {
            "tournament_id": tournament_id,
            "tournament": self._state.tournaments.get(tournament_id),
            "comparisons": rows,
        }


def store_fingerprint(root: str) -> dict[str, str]:
    """Normalized contents of every store file, keyed by file name.

    Timestamps are the only tolerated difference between two runs of the
    same pipeline, so they are replaced with a fixed token before comparing.
    """
    out = {}
    for name in DOC_FILES + (LOG_FILE,):
        path = os.path.join(root, name)
        with open(path, "r", encoding="utf-8") as fh:
            out[name] = normalize_timestamps(fh.read())
    return out
