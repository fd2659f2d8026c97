"""End-to-end project pipeline: problems -> solutions -> policies -> evidence.

Each stage records a completion marker in the store when it finishes, and the
long stages additionally record one marker per sub-problem (or per policy for
evidence), so a run killed at any point picks up where it stopped: finished
work is skipped, and the in-progress step re-runs from its last recorded
checkpoint (generation reports, drafted policies, attached evidence). Under a
fixed seed and fixture corpus a resumed run converges on the same store as an
uninterrupted one.
"""

import logging
from typing import Callable, Optional

from .config import apply_overrides
from .evolution import SolutionEvolver
from .policy import PolicyEngine
from .research import ResearchEngine
from .store import ProjectStore

log = logging.getLogger(__name__)

STAGES = ("problems", "solutions", "policies", "evidence")


class PipelineError(RuntimeError):
    pass


class Pipeline:
    """Drives one project through research, evolution, policies and evidence.

    `on_event(kind, payload)` is an optional progress hook; it receives
    node_started/node_done around stages and sub-steps, generation_done for
    each freshly evolved generation, item_persisted for newly stored rows,
    and warning for every engine warning. Payloads are JSON-safe dicts.
    """

    def __init__(
        self,
        hub,
        store: ProjectStore,
        fetcher,
        seed: int = 0,
        on_event: Optional[Callable[[str, dict], None]] = None,
        config_overrides: Optional[dict] = None,
    ):
        self.hub = hub
        self.store = store
        self.seed = seed
        self.config = store.config()
        if config_overrides:
            self.config = apply_overrides(self.config, config_overrides)
        self.research = ResearchEngine(hub, store, fetcher, seed=seed, config=self.config)
        self.policy = PolicyEngine(
            hub, store, research=self.research, seed=seed, config=self.config
        )
        self.on_event = on_event
        self.warnings: list[str] = []
        self._drained = {"research": 0, "policy": 0}

    # ---------------------------------------------------------------- events

    def _emit(self, kind: str, payload: dict) -> None:
        if self.on_event is not None:
            self.on_event(kind, payload)

    def _drain_warnings(self, *extra_sources) -> None:
        """Forward engine warnings gathered since the last drain."""
        for name in ("research", "policy"):
            engine = getattr(self, name)
            fresh = engine.warnings[self._drained[name] :]
            self._drained[name] = len(engine.warnings)
            for message in fresh:
                self._warn(message)
        for source in extra_sources:
            for message in source.warnings:
                self._warn(message)

    def _warn(self, message: str) -> None:
        log.warning("%s", message)
        self.warnings.append(message)
        self._emit("warning", {"message": message})

    # ---------------------------------------------------------------- stages

    def run(self, through: str = "evidence") -> dict:
        """Run every stage up to and including `through`.

        Already-finished stages are skipped. Returns the store's stage
        completion map.
        """
        if through not in STAGES:
            raise PipelineError(
                f"unknown stage {through!r}; expected one of {', '.join(STAGES)}"
            )
        for stage in STAGES[: STAGES.index(through) + 1]:
            self.run_stage(stage)
        return self.store.stages_done()

    def run_stage(self, stage: str) -> bool:
        """Run one stage; returns False when it had already finished."""
        if stage not in STAGES:
            raise PipelineError(
                f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}"
            )
        if self.store.stage_done(stage):
            log.info("stage %s already done; skipping", stage)
            return False
        position = STAGES.index(stage)
        for required in STAGES[:position]:
            if not self.store.stage_done(required):
                raise PipelineError(
                    f"stage {stage!r} requires {required!r} to finish first"
                )
        self._emit("node_started", {"node": stage})
        info = getattr(self, f"_stage_{stage}")()
        self._drain_warnings()
        self.store.mark_stage_done(stage, info)
        self.store.flush()
        self._emit("node_done", {"node": stage, **info})
        log.info("stage %s done: %s", stage, info)
        return True

    def _active_subproblems(self):
        active = self.store.subproblems(active_only=True)
        if not active:
            raise PipelineError(
                "no active sub-problems; run the problems stage or reactivate one"
            )
        return active

    def _stage_problems(self) -> dict:
        subproblems = self.research.problems_stage()
        self._drain_warnings()
        for sp in subproblems:
            self._emit(
                "item_persisted",
                {"type": "subproblem", "id": sp.id, "title": sp.title},
            )
        return {"subproblems": len(subproblems)}

    def _stage_solutions(self) -> dict:
        active = self._active_subproblems()
        for sp in active:
            marker = f"solutions:{sp.id}"
            if self.store.stage_done(marker):
                continue
            self._emit("node_started", {"node": marker})
            evolver = SolutionEvolver(
                self.hub, self.store, sp, seed=self.seed, project_config=self.config
            )
            if not self.store.generation_reports("solution", sp.id):
                sourced = self.research.solutions_stage(sp)
                self._drain_warnings()
                for sol in sourced:
                    self._emit(
                        "item_persisted",
                        {"type": "solution", "id": sol.id, "title": sol.title},
                    )
                evolver.seed_population()
            final, _ = evolver.run(
                on_generation=lambda rep: self._emit(
                    "generation_done",
                    {
                        "kind": "solution",
                        "subproblem_id": rep.subproblem_id,
                        "index": rep.index,
                        "members": len(rep.member_ids),
                    },
                )
            )
            self._drain_warnings(evolver)
            info = {"members": len(final)}
            self.store.mark_stage_done(marker, info)
            self.store.flush()
            self._emit("node_done", {"node": marker, **info})
        return {"subproblems": len(active)}

    def _stage_policies(self) -> dict:
        active = self._active_subproblems()
        for sp in active:
            marker = f"policies:{sp.id}"
            if self.store.stage_done(marker):
                continue
            self._emit("node_started", {"node": marker})
            if not self.store.policies(subproblem_id=sp.id):
                for pol in self.policy.solutions_to_policies(sp):
                    self._emit(
                        "item_persisted",
                        {"type": "policy", "id": pol.id, "title": pol.title},
                    )
            recorded = {
                r.index for r in self.store.generation_reports("policy", sp.id)
            }
            ranked, reports = self.policy.evolve_policies(sp)
            for rep in reports:
                if rep.index not in recorded:
                    self._emit(
                        "generation_done",
                        {
                            "kind": "policy",
                            "subproblem_id": sp.id,
                            "index": rep.index,
                            "members": len(rep.member_ids),
                        },
                    )
            self._drain_warnings()
            info = {"policies": len(ranked)}
            self.store.mark_stage_done(marker, info)
            self.store.flush()
            self._emit("node_done", {"node": marker, **info})
        return {"subproblems": len(active)}

    def _stage_evidence(self) -> dict:
        active = self._active_subproblems()
        total = 0
        for sp in active:
            for pol in self._policies_for_evidence(sp):
                total += 1
                marker = f"evidence:{pol.id}"
                if self.store.stage_done(marker):
                    continue
                self._emit("node_started", {"node": marker})
                fresh = self.policy.gather_evidence(pol)
                self._drain_warnings()
                info = {"items": len(fresh.evidence)}
                self.store.mark_stage_done(marker, info)
                self.store.flush()
                self._emit("node_done", {"node": marker, **info})
        return {"policies": total}

    def _policies_for_evidence(self, sp):
        """Evidence targets the surviving policy set: the last recorded
        generation's members, or every drafted policy when refinement was
        skipped."""
        reports = self.store.generation_reports("policy", sp.id)
        if reports:
            return [self.store.get_policy(i) for i in reports[-1].member_ids]
        return self.store.policies(subproblem_id=sp.id)
