"""HTTP service over one project: reads, pairwise votes, stage runs.

The gateway is the project's single writer. It holds the store's writer
lock for its whole lifetime and funnels every mutation — votes, sub-problem
toggles, and background stage runs — through one in-process lock, so
concurrent voters and a live run never interleave inside a store call.
Reads take the same lock briefly and never mutate.

Stage runs execute on a background thread and publish RunEvents; clients
follow along with long-polled `GET /runs/{id}/events?since=N`. The event
sequence is strictly increasing per run and ends with a terminal
`completed` or `failed` event.

Deployments that need an access gate set SYNTHKIT_GATEWAY_SECRET; every
API request must then carry the same value in the X-Synthkit-Secret header.
"""

import logging
import os
import random
import threading
import time
from contextlib import asynccontextmanager
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .config import ConfigError, TournamentPlan, apply_overrides
from .evolution import lineage_export
from .model import Comparison
from .pipeline import STAGES, Pipeline
from .policy import evidence_export
from .ranking import RankingError, apply_outcome, schedule_pairs
from .store import ProjectStore, StoreError
from .util import derive_rng

log = logging.getLogger(__name__)

SECRET_ENV = "SYNTHKIT_GATEWAY_SECRET"
SECRET_HEADER = "x-synthkit-secret"

RUN_STAGES = STAGES + ("all",)


# ---------------------------------------------------------------------------
# request bodies


class VoteBody(BaseModel):
    pair_index: int = Field(ge=0)
    outcome: Literal["One", "Two", "Neither"]
    voter: str = Field(min_length=1, max_length=200)


class DeactivateBody(BaseModel):
    active: bool = False


class RunBody(BaseModel):
    stage: str
    config_overrides: Optional[dict] = None


class TournamentBody(BaseModel):
    kind: Literal["solution", "policy"] = "solution"
    subproblem_id: Optional[str] = None
    item_ids: Optional[list[str]] = None
    rounds: Optional[int] = Field(default=None, ge=1, le=50)


# ---------------------------------------------------------------------------
# store serialization


class LockedStore:
    """Proxy that serializes every store method call through one lock.

    The background run thread works against this proxy, so its store calls
    interleave safely with request handlers that take the same lock.
    """

    def __init__(self, store: ProjectStore, lock: threading.RLock):
        self._store = store
        self._lock = lock

    def __getattr__(self, name):
        attr = getattr(self._store, name)
        if not callable(attr):
            return attr

        def locked(*args, **kwargs):
            with self._lock:
                return attr(*args, **kwargs)

        return locked


class RunState:
    """In-memory record of one triggered stage run and its event stream."""

    def __init__(self, run_id: str, stage: str):
        self.id = run_id
        self.stage = stage
        self.status = "running"
        self.sequence = 0
        self.events: list[dict] = []
        self.cond = threading.Condition()
        self.thread: Optional[threading.Thread] = None

    def push(self, kind: str, payload: dict) -> None:
        with self.cond:
            self.sequence += 1
            self.events.append(
                {
                    "run_id": self.id,
                    "stage": self.stage,
                    "sequence": self.sequence,
                    "kind": kind,
                    "payload": payload,
                }
            )
            if kind in ("completed", "failed"):
                self.status = kind
            self.cond.notify_all()

    def collect(self, since: int, timeout_s: float) -> list[dict]:
        """Events with sequence > since; blocks until some exist, the run
        ends, or the timeout passes."""
        deadline = time.monotonic() + timeout_s
        with self.cond:
            while (
                self.sequence <= since
                and self.status == "running"
                and (remaining := deadline - time.monotonic()) > 0
            ):
                self.cond.wait(remaining)
            return [e for e in self.events if e["sequence"] > since]


class Gateway:
    """Shared state behind the HTTP app: store handle, runs, locks."""

    def __init__(self, project_root: str, hub_factory=None, seed: int = 0, poll_timeout_s: float = 25.0):
        self.store = ProjectStore.open(project_root)
        self.hub_factory = hub_factory
        self.seed = seed
        self.poll_timeout_s = poll_timeout_s
        self.lock = threading.RLock()
        self.runs: dict[str, RunState] = {}
        self.active_run: Optional[RunState] = None
        self._run_counter = 0
        self._pair_rng = random.Random()

    def close(self) -> None:
        run = self.active_run
        if run is not None and run.thread is not None:
            run.thread.join(timeout=60)
        self.store.close()

    # ----------------------------------------------------------------- runs

    def start_run(self, stage: str, config_overrides: Optional[dict]) -> RunState:
        if self.hub_factory is None:
            raise HTTPException(503, "this gateway is read-only: no providers configured")
        with self.lock:
            if self.active_run is not None and self.active_run.status == "running":
                raise HTTPException(
                    409, f"run {self.active_run.id} is still active on this project"
                )
            if stage != "all":
                for required in STAGES[: STAGES.index(stage)]:
                    if not self.store.stage_done(required):
                        raise HTTPException(
                            409, f"stage {stage!r} requires {required!r} to finish first"
                        )
            if config_overrides:
                try:
                    apply_overrides(self.store.config(), config_overrides)
                except ConfigError as exc:
                    raise HTTPException(422, str(exc)) from None
            self._run_counter += 1
            run = RunState(f"run-{self._run_counter:04d}", stage)
            self.runs[run.id] = run
            self.active_run = run
        run.thread = threading.Thread(
            target=self._execute_run, args=(run, config_overrides), daemon=True
        )
        run.thread.start()
        return run

    def _execute_run(self, run: RunState, config_overrides: Optional[dict]) -> None:
        try:
            hub, fetcher = self.hub_factory()
            pipeline = Pipeline(
                hub,
                LockedStore(self.store, self.lock),
                fetcher,
                seed=self.seed,
                on_event=run.push,
                config_overrides=config_overrides,
            )
            if run.stage == "all":
                pipeline.run()
            else:
                pipeline.run_stage(run.stage)
            run.push("completed", {"stages_done": sorted(self.store.stages_done())})
        except Exception as exc:
            log.exception("run %s failed", run.id)
            run.push("failed", {"error": str(exc)})


# ---------------------------------------------------------------------------
# view helpers


def _subproblem_view(store: ProjectStore, sp) -> dict:
    return {
        "id": sp.id,
        "title": sp.title,
        "description": sp.description,
        "active": sp.active,
        "rating": sp.elo.rating,
        "games_played": sp.elo.games_played,
        "affected_entities": [e.name for e in sp.affected_entities],
        "generations": [r.index for r in store.generation_reports("solution", sp.id)],
        "policy_generations": [
            r.index for r in store.generation_reports("policy", sp.id)
        ],
    }


def _solution_view(sol, rating: Optional[float] = None) -> dict:
    return {
        "id": sol.id,
        "subproblem_id": sol.subproblem_id,
        "title": sol.title,
        "description": sol.description,
        "pros": list(sol.pros),
        "cons": list(sol.cons),
        "origin": sol.origin,
        "generation_index": sol.generation_index,
        "viable": sol.viable,
        "parent_ids": list(sol.parent_ids),
        "rating": sol.elo.rating if rating is None else rating,
        "games_played": sol.elo.games_played,
    }


def _item_view(item) -> dict:
    """Minimal card for a votable item of any rated kind."""
    return {
        "id": item.id,
        "title": item.title,
        "description": item.description,
        "pros": list(getattr(item, "pros", [])),
        "cons": list(getattr(item, "cons", [])),
        "rating": item.elo.rating,
        "games_played": item.elo.games_played,
    }


def _rated_item(store: ProjectStore, item_id: str):
    for getter in (store.get_solution, store.get_policy, store.get_subproblem):
        try:
            return getter(item_id)
        except StoreError:
            continue
    raise HTTPException(404, f"unknown item: {item_id}")


def _tournament_summary(store: ProjectStore, t: dict) -> dict:
    pairs = t.get("pairs", [])
    voted = store.voted_pair_indexes(t["id"])
    return {
        "id": t["id"],
        "kind": t.get("kind", "solution"),
        "voter_kind": t.get("voter_kind", "model"),
        "open": t.get("open", False),
        "items": len(t.get("item_ids", [])),
        "total_pairs": len(pairs),
        "votes_cast": len(store.comparisons(t["id"])),
        "open_pairs": max(0, len(pairs) - len(voted)) if pairs else 0,
    }


def _pair_payload(store: ProjectStore, t: dict) -> tuple[dict, list[int]]:
    """Shared shape for next-pair lookups plus the open pair indexes."""
    tid = t["id"]
    pairs = t.get("pairs", [])
    voted = store.voted_pair_indexes(tid)
    open_indexes = [i for i in range(len(pairs)) if i not in voted]
    payload = {
        "tournament_id": tid,
        "open": bool(t.get("open", False)),
        "total_pairs": len(pairs),
        "votes_cast": len(voted),
        "open_pairs": len(open_indexes) if t.get("open") else 0,
        "pair": None,
    }
    return payload, open_indexes


# ---------------------------------------------------------------------------
# app factory


def create_app(
    project_root: str,
    hub_factory=None,
    seed: int = 0,
    static_dir: Optional[str] = None,
    poll_timeout_s: float = 25.0,
    secret: Optional[str] = None,
) -> FastAPI:
    """Build the HTTP app over one project directory.

    hub_factory() -> (hub, fetcher) supplies providers for triggered runs;
    without it the gateway serves reads and votes only. `secret` (or the
    SYNTHKIT_GATEWAY_SECRET env var) gates every API request when set.
    """
    gw = Gateway(project_root, hub_factory=hub_factory, seed=seed, poll_timeout_s=poll_timeout_s)
    required_secret = secret if secret is not None else os.environ.get(SECRET_ENV, "")

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        gw.close()

    app = FastAPI(title="synthkit gateway", lifespan=lifespan)
    app.state.gateway = gw

    if required_secret:

        @app.middleware("http")
        async def check_secret(request, call_next):
            path = request.url.path
            if path.startswith(("/projects", "/tournaments", "/runs")):
                if request.headers.get(SECRET_HEADER) != required_secret:
                    return JSONResponse(
                        {"detail": "missing or wrong gateway secret"}, status_code=401
                    )
            return await call_next(request)

    def check_project(project_id: str) -> None:
        if project_id != gw.store.project_id:
            raise HTTPException(404, f"unknown project: {project_id}")

    # ------------------------------------------------------------------ reads

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        with gw.lock:
            check_project(project_id)
            store = gw.store
            tournaments = sorted(store.tournaments().values(), key=lambda t: t["id"])
            active = gw.active_run
            return {
                "project_id": store.project_id,
                "statement": store.statement.to_dict(),
                "created_at": store.created_at,
                "stages_done": store.stages_done(),
                "counts": {
                    "subproblems": len(store.subproblems()),
                    "solutions": len(store.solutions()),
                    "policies": len(store.policies()),
                    "sources": len(store.sources()),
                },
                "tournaments": [_tournament_summary(store, t) for t in tournaments],
                "policies": [
                    {
                        "id": p.id,
                        "subproblem_id": p.subproblem_id,
                        "title": p.title,
                        "rating": p.elo.rating,
                        "evidence_items": len(p.evidence),
                    }
                    for p in store.policies()
                ],
                "active_run": active.id if active and active.status == "running" else None,
            }

    @app.get("/projects/{project_id}/subproblems")
    def list_subproblems(project_id: str):
        with gw.lock:
            check_project(project_id)
            return {
                "subproblems": [
                    _subproblem_view(gw.store, sp) for sp in gw.store.subproblems()
                ]
            }

    @app.get("/projects/{project_id}/solutions")
    def list_solutions(
        project_id: str,
        generation: Optional[int] = Query(default=None, ge=0),
        subproblem: Optional[str] = Query(default=None),
    ):
        with gw.lock:
            check_project(project_id)
            store = gw.store
            if subproblem is not None:
                try:
                    sps = [store.get_subproblem(subproblem)]
                except StoreError as exc:
                    raise HTTPException(404, str(exc)) from None
            else:
                sps = store.subproblems()
            rows = []
            if generation is None:
                for sp in sps:
                    rows.extend(
                        _solution_view(s)
                        for s in store.solutions(subproblem_id=sp.id)
                    )
            else:
                # A generation tab shows that report's population with the
                # ratings recorded when the generation closed.
                for sp in sps:
                    for report in store.generation_reports("solution", sp.id):
                        if report.index != generation:
                            continue
                        for member_id in report.member_ids:
                            sol = store.get_solution(member_id)
                            rows.append(
                                _solution_view(sol, rating=report.ratings.get(member_id))
                            )
            return {"generation": generation, "solutions": rows}

    @app.get("/projects/{project_id}/lineage/{subproblem_id}")
    def get_lineage(project_id: str, subproblem_id: str):
        with gw.lock:
            check_project(project_id)
            try:
                gw.store.get_subproblem(subproblem_id)
            except StoreError as exc:
                raise HTTPException(404, str(exc)) from None
            return lineage_export(gw.store, subproblem_id)

    @app.get("/projects/{project_id}/policies/{policy_id}/evidence")
    def get_policy_evidence(project_id: str, policy_id: str):
        with gw.lock:
            check_project(project_id)
            try:
                return evidence_export(gw.store, policy_id)
            except StoreError as exc:
                raise HTTPException(404, str(exc)) from None

    # -------------------------------------------------------------- steering

    @app.post("/projects/{project_id}/subproblems/{subproblem_id}/deactivate")
    def deactivate_subproblem(
        project_id: str, subproblem_id: str, body: Optional[DeactivateBody] = None
    ):
        wanted = (body or DeactivateBody()).active
        with gw.lock:
            check_project(project_id)
            try:
                sp = gw.store.get_subproblem(subproblem_id)
            except StoreError as exc:
                raise HTTPException(404, str(exc)) from None
            if sp.active == wanted:
                state = "active" if wanted else "inactive"
                raise HTTPException(409, f"{subproblem_id} is already {state}")
            gw.store.set_subproblem_active(subproblem_id, wanted)
            gw.store.flush()
            return _subproblem_view(gw.store, gw.store.get_subproblem(subproblem_id))

    # ---------------------------------------------------------------- voting

    @app.post("/projects/{project_id}/tournaments", status_code=201)
    def open_voting_tournament(project_id: str, body: TournamentBody):
        with gw.lock:
            check_project(project_id)
            store = gw.store
            if body.item_ids:
                items = [_rated_item(store, i) for i in body.item_ids]
            elif body.subproblem_id:
                try:
                    store.get_subproblem(body.subproblem_id)
                except StoreError as exc:
                    raise HTTPException(404, str(exc)) from None
                kind = "policy" if body.kind == "policy" else "solution"
                reports = store.generation_reports(kind, body.subproblem_id)
                if not reports:
                    raise HTTPException(
                        409, f"no recorded {kind} generation for {body.subproblem_id}"
                    )
                getter = store.get_policy if kind == "policy" else store.get_solution
                items = [getter(i) for i in reports[-1].member_ids]
            else:
                raise HTTPException(422, "provide subproblem_id or item_ids")
            config = store.config()
            plan = config.evolution.tournament
            if body.rounds is not None:
                plan = TournamentPlan(
                    rounds=body.rounds,
                    pairing=plan.pairing,
                    min_games_per_item=min(plan.min_games_per_item, body.rounds),
                )
            tid = f"ht-{len([t for t in store.tournaments() if t.startswith('ht-')]) + 1:03d}"
            try:
                pairs = schedule_pairs(items, plan, derive_rng(gw.seed, "human-tournament", tid))
            except RankingError as exc:
                raise HTTPException(422, str(exc)) from None
            store.open_tournament(
                {
                    "id": tid,
                    "kind": body.kind,
                    "item_ids": [it.id for it in items],
                    "open": True,
                    "voter_kind": "human",
                    "pairs": [list(p) for p in pairs],
                }
            )
            store.flush()
            return _tournament_summary(store, store.tournaments()[tid])

    def _human_tournament(tid: str) -> dict:
        t = gw.store.tournaments().get(tid)
        if t is None:
            raise HTTPException(404, f"unknown tournament: {tid}")
        if t.get("voter_kind") != "human":
            raise HTTPException(409, f"{tid} is not a human-voting tournament")
        return t

    def _next_pair(t: dict) -> dict:
        payload, open_indexes = _pair_payload(gw.store, t)
        if payload["open"] and open_indexes:
            index = gw._pair_rng.choice(open_indexes)
            a, b = t["pairs"][index]
            payload["pair"] = {
                "pair_index": index,
                "one": _item_view(_rated_item(gw.store, a)),
                "two": _item_view(_rated_item(gw.store, b)),
            }
        return payload

    @app.get("/tournaments/{tournament_id}/next-pair")
    def next_pair(tournament_id: str):
        with gw.lock:
            return _next_pair(_human_tournament(tournament_id))

    @app.post("/tournaments/{tournament_id}/votes")
    def submit_vote(tournament_id: str, body: VoteBody):
        with gw.lock:
            store = gw.store
            t = _human_tournament(tournament_id)
            if not t.get("open"):
                raise HTTPException(409, f"{tournament_id} is closed")
            pairs = t.get("pairs", [])
            if body.pair_index >= len(pairs):
                raise HTTPException(
                    422, f"pair_index {body.pair_index} out of range (0..{len(pairs) - 1})"
                )
            voted = store.voted_pair_indexes(tournament_id)
            if body.pair_index in voted:
                raise HTTPException(409, f"pair {body.pair_index} was already voted")
            a_id, b_id = pairs[body.pair_index]
            a = _rated_item(store, a_id)
            b = _rated_item(store, b_id)
            a.elo, b.elo = apply_outcome(
                a.elo, b.elo, body.outcome, store.config().elo
            )
            store.record_comparison(
                Comparison(
                    tournament_id=tournament_id,
                    item_a=a_id,
                    item_b=b_id,
                    outcome=body.outcome,
                    voter_kind="human",
                    voter_id=body.voter,
                ),
                [a, b],
                pair_index=body.pair_index,
            )
            if len(store.voted_pair_indexes(tournament_id)) == len(pairs):
                store.close_tournament(tournament_id)
            store.flush()
            t = store.tournaments()[tournament_id]
            voter_votes = sum(
                1
                for row in store.comparisons(tournament_id)
                if row["comparison"]["voter_id"] == body.voter
            )
            return {
                "recorded": True,
                "pair_index": body.pair_index,
                "outcome": body.outcome,
                "ratings_after": {
                    a_id: {"rating": a.elo.rating, "games_played": a.elo.games_played},
                    b_id: {"rating": b.elo.rating, "games_played": b.elo.games_played},
                },
                "voter_votes": voter_votes,
                "next": _next_pair(t),
            }

    # ------------------------------------------------------------------ runs

    @app.post("/projects/{project_id}/runs", status_code=202)
    def trigger_run(project_id: str, body: RunBody):
        with gw.lock:
            check_project(project_id)
        if body.stage not in RUN_STAGES:
            raise HTTPException(
                422,
                f"unknown stage {body.stage!r}; expected one of {', '.join(RUN_STAGES)}",
            )
        run = gw.start_run(body.stage, body.config_overrides)
        return {"run_id": run.id, "stage": run.stage, "status": run.status}

    @app.get("/runs/{run_id}/events")
    def run_events(
        run_id: str,
        since: int = Query(default=0, ge=0),
        wait: Optional[float] = Query(default=None, ge=0.0, le=60.0),
    ):
        run = gw.runs.get(run_id)
        if run is None:
            raise HTTPException(404, f"unknown run: {run_id}")
        timeout = gw.poll_timeout_s if wait is None else wait
        events = run.collect(since, timeout)
        return {
            "run_id": run.id,
            "stage": run.stage,
            "status": run.status,
            "last_sequence": run.sequence,
            "events": events,
        }

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
