"""Agent workflow orchestration.

Single-prompt agents are composed into directed acyclic graphs with three
pieces of machinery:

- run_node: render a template, call the model, parse the reply against the
  node's output schema, with one automatic re-ask on a formatting failure.
- run_validation_loop: a producer node guarded by parallel validator nodes;
  any objection sends the producer back for a bounded number of repair
  rounds with the objections appended.
- WorkflowRun: checkpointed execution over the node graph, so a run killed
  at any node boundary resumes without re-executing finished nodes.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from . import prompts
from .model import VOTE_OUTCOMES
from .util import atomic_write, bounded_map, dump_json_line, now_rfc3339, parse_json_block

log = logging.getLogger(__name__)


class OrchestratorError(RuntimeError):
    pass


class NodeError(OrchestratorError):
    """A node's output failed its schema even after the automatic re-ask."""


class ValidationExhausted(OrchestratorError):
    def __init__(self, message: str, objections: list[str]):
        super().__init__(message)
        self.objections = objections


class CheckpointError(OrchestratorError):
    pass


# ---------------------------------------------------------------------------
# Output schemas

_REASK_SUFFIX = (
    "\n\nYour previous reply could not be used: {error}."
    " Reply again following the required output format exactly."
)


def parse_output(schema: str, text: str) -> Any:
    """Parse raw model text against a declarative schema name."""
    text = text.strip()
    if schema == "text":
        if not text:
            raise ValueError("empty output")
        return text
    if schema == "vote":
        if text in VOTE_OUTCOMES:
            return text
        for token in VOTE_OUTCOMES:
            if token in text:
                return token
        raise ValueError('expected "One", "Two" or "Neither"')
    if schema == "yes_no":
        lowered = text.lower()
        if lowered.startswith("yes"):
            return "Yes"
        if lowered.startswith("no"):
            return "No"
        raise ValueError('expected "Yes" or "No"')
    if schema == "verdict":
        if text.upper().startswith("PASS"):
            return "PASS"
        if text.upper().startswith("FAIL"):
            return text
        raise ValueError('expected "PASS" or "FAIL: <objection>"')
    if schema == "int_percent":
        try:
            value = int(text.split()[0].rstrip("%."))
        except (ValueError, IndexError):
            raise ValueError("expected an integer") from None
        if not 0 <= value <= 100:
            raise ValueError("integer out of [0, 100]")
        return value
    if schema in ("json", "json_object", "json_array"):
        value = parse_json_block(text)
        if schema == "json_object" and not isinstance(value, dict):
            raise ValueError("expected a JSON object")
        if schema == "json_array" and not isinstance(value, list):
            raise ValueError("expected a JSON array")
        return value
    raise OrchestratorError(f"unknown output schema: {schema}")


# ---------------------------------------------------------------------------
# Agent nodes


@dataclass
class AgentNode:
    name: str
    template: str  # registered prompt-template name
    tier: str = "fast"
    output_schema: str = "text"
    max_repair_rounds: int = 2
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.max_repair_rounds < 0:
            raise OrchestratorError("max_repair_rounds cannot be negative")


def run_node(
    hub,
    node: AgentNode,
    bindings: dict[str, str],
    user_suffix: str = "",
) -> Any:
    """Render, complete, and parse one agent node.

    A parse failure triggers exactly one re-ask with the parse error
    appended to the user message; a second failure raises NodeError.
    user_suffix lets callers (the validation loop) extend the request
    without touching the template.
    """
    rendered = prompts.render(node.template, **bindings)
    from .providers import ModelRequest

    def ask(extra: str) -> str:
        request = ModelRequest(
            tier=node.tier,
            system_message=rendered.system,
            user_message=rendered.user + user_suffix + extra,
            temperature=node.temperature,
            max_output_tokens=node.max_output_tokens,
            template=rendered.template,
            slots=rendered.slots,
        )
        return hub.complete(request).text

    text = ask("")
    try:
        return parse_output(node.output_schema, text)
    except ValueError as first_error:
        log.info("node %s: re-asking after parse failure: %s", node.name, first_error)
        text = ask(_REASK_SUFFIX.format(error=first_error))
        try:
            return parse_output(node.output_schema, text)
        except ValueError as second_error:
            raise NodeError(
                f"node {node.name}: output failed schema {node.output_schema!r}"
                f" after re-ask: {second_error}"
            ) from second_error


# ---------------------------------------------------------------------------
# Validation loops


@dataclass
class ValidationLoop:
    producer: AgentNode
    validators: list[AgentNode]
    # Maps (producer bindings, candidate text) to one validator's bindings.
    validator_bindings: Callable[[dict, str], dict] = lambda b, c: {
        "original": b.get("text", ""),
        "candidate": c,
    }

    def __post_init__(self) -> None:
        if not self.validators:
            raise OrchestratorError("a validation loop needs at least one validator")


@dataclass
class ValidatedOutput:
    output: Any
    text: str
    repairs: int
    objections_log: list[list[str]] = field(default_factory=list)


def run_validation_loop(
    hub, loop: ValidationLoop, bindings: dict[str, str]
) -> ValidatedOutput:
    """Produce, validate in parallel, repair on objections, bounded rounds.

    The producer runs once plus at most max_repair_rounds repairs; every
    repair round appends the previous round's objections to the request so
    the producer sees what to fix.
    """
    suffix = ""
    objections_log: list[list[str]] = []
    max_workers = hub.config.providers.max_concurrent_requests
    for round_no in range(loop.producer.max_repair_rounds + 1):
        output = run_node(hub, loop.producer, bindings, user_suffix=suffix)
        text = output if isinstance(output, str) else json.dumps(output)

        def check(validator: AgentNode) -> str:
            verdict = run_node(hub, validator, loop.validator_bindings(bindings, text))
            return "" if verdict == "PASS" else str(verdict)

        verdicts = bounded_map(check, loop.validators, max_workers)
        objections = [v for v in verdicts if v]
        if not objections:
            return ValidatedOutput(
                output=output, text=text, repairs=round_no, objections_log=objections_log
            )
        objections_log.append(objections)
        suffix = (
            f"\n\nRepair round {round_no + 1}. Your previous draft was rejected"
            " for these reasons:\n"
            + "\n".join(f"- {o}" for o in objections)
            + "\nProduce a corrected version."
        )
    raise ValidationExhausted(
        f"{loop.producer.name}: still failing after"
        f" {loop.producer.max_repair_rounds} repair rounds",
        objections=objections_log[-1],
    )


def compression_loop(max_repair_rounds: int = 2, validator_count: int = 3) -> ValidationLoop:
    """Standard guarded compressor: shorten text, keep every fact.

    Validators check correctness, completeness, and absence of invented
    detail; validator_count trims the list from the front (1 = correctness
    only).
    """
    validators = [
        AgentNode(name="check-correctness", template="validate_correctness", output_schema="verdict"),
        AgentNode(name="check-completeness", template="validate_completeness", output_schema="verdict"),
        AgentNode(name="check-hallucination", template="validate_hallucination", output_schema="verdict"),
    ][:validator_count]
    return ValidationLoop(
        producer=AgentNode(
            name="compress",
            template="compress",
            output_schema="text",
            max_repair_rounds=max_repair_rounds,
        ),
        validators=validators,
    )


def compress_text(hub, text: str, max_repair_rounds: int = 2) -> ValidatedOutput:
    if not text.strip():
        raise OrchestratorError("cannot compress empty text")
    loop = compression_loop(max_repair_rounds=max_repair_rounds)
    result = run_validation_loop(hub, loop, {"text": text})
    if len(result.text.split()) > len(text.split()):
        log.warning("compression grew the text (%d -> %d words)",
                    len(text.split()), len(result.text.split()))
    return result


# ---------------------------------------------------------------------------
# Checkpointed workflow runs


@dataclass
class Step:
    """One unit of a workflow: fn(ctx) where ctx maps dependency name -> output."""

    name: str
    fn: Callable[[dict], Any]
    after: tuple[str, ...] = ()


def _topological_order(steps: Sequence[Step]) -> list[Step]:
    by_name = {s.name: s for s in steps}
    if len(by_name) != len(steps):
        raise OrchestratorError("duplicate step names in workflow")
    for s in steps:
        for dep in s.after:
            if dep not in by_name:
                raise OrchestratorError(f"step {s.name} depends on unknown step {dep}")
    order: list[Step] = []
    seen: dict[str, int] = {}  # 0 = visiting, 1 = done

    def visit(name: str) -> None:
        state = seen.get(name)
        if state == 1:
            return
        if state == 0:
            raise OrchestratorError(f"workflow graph has a cycle through {name}")
        seen[name] = 0
        for dep in by_name[name].after:
            visit(dep)
        seen[name] = 1
        order.append(by_name[name])

    for s in steps:
        visit(s.name)
    return order


class WorkflowRun:
    """A checkpointed execution of a step graph.

    Progress is appended to runs/<run_id>/checkpoint.log, one JSON record
    per line; resuming replays the log and re-executes only steps without a
    node_done record. The cost ledger snapshot rides along in each record
    so a resumed run continues metering where it stopped.
    """

    def __init__(self, run_id: str, steps: Sequence[Step], runs_dir: str, ledger=None):
        if not run_id:
            raise OrchestratorError("run_id must be non-empty")
        self.run_id = run_id
        self.steps = _topological_order(steps)
        self.dir = os.path.join(runs_dir, run_id)
        self.path = os.path.join(self.dir, "checkpoint.log")
        self.ledger = ledger
        self.outputs: dict[str, Any] = {}
        self.failed: dict[str, str] = {}
        self.completed = False
        self._seq = 0
        self._lock = threading.Lock()
        os.makedirs(self.dir, exist_ok=True)
        if os.path.exists(self.path):
            self._load()

    # ------------------------------------------------------------- loading

    def _load(self) -> None:
        with open(self.path, "rb") as fh:
            raw = fh.read()
        if raw and not raw.endswith(b"\n"):
            line_no = raw.count(b"\n") + 1
            raise CheckpointError(
                f"{self.path}: record {line_no} is truncated (no trailing newline)"
            )
        for i, line in enumerate(raw.splitlines(), start=1):
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CheckpointError(
                    f"{self.path}: record {i} is not valid JSON: {exc}"
                ) from exc
            if record.get("seq") != i:
                raise CheckpointError(
                    f"{self.path}: record {i} has sequence {record.get('seq')!r}"
                )
            self._seq = i
            kind = record.get("kind")
            if kind == "node_done":
                self.outputs[record["node"]] = record["output"]
            elif kind == "node_failed":
                self.failed[record["node"]] = record.get("error", "")
            elif kind == "run_completed":
                self.completed = True
            elif kind not in ("run_started",):
                raise CheckpointError(
                    f"{self.path}: record {i} has unknown kind {kind!r}"
                )
        if self.ledger is not None and self._seq:
            # Restore metering to the last snapshot so totals never reset.
            last = None
            for line in raw.splitlines():
                record = json.loads(line)
                if "ledger" in record:
                    last = record["ledger"]
            if last:
                self.ledger.restore(last)

    def _append(self, record: dict) -> None:
        with self._lock:
            self._seq += 1
            record = {"seq": self._seq, "ts": now_rfc3339(), **record}
            if self.ledger is not None:
                record["ledger"] = self.ledger.snapshot()
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(dump_json_line(record) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    # ------------------------------------------------------------- running

    def status(self) -> dict[str, str]:
        out = {}
        for s in self.steps:
            if s.name in self.outputs:
                out[s.name] = "done"
            elif s.name in self.failed:
                out[s.name] = "failed"
            else:
                out[s.name] = "pending"
        return out

    def execute(self, on_event: Optional[Callable[[str, str], None]] = None) -> dict:
        """Run all steps not already done; return all outputs by step name.

        A completed run is a no-op. Step failures are checkpointed, then
        re-raised; resuming retries failed and pending steps only.
        """
        if self.completed:
            return dict(self.outputs)
        if self._seq == 0:
            self._append({"kind": "run_started", "run_id": self.run_id,
                          "steps": [s.name for s in self.steps]})
        for step in self.steps:
            if step.name in self.outputs:
                continue
            if on_event:
                on_event("node_started", step.name)
            ctx = {dep: self.outputs[dep] for dep in step.after}
            try:
                output = step.fn(ctx)
            except Exception as exc:
                self.failed[step.name] = str(exc)
                self._append({"kind": "node_failed", "node": step.name, "error": str(exc)})
                raise
            self.failed.pop(step.name, None)
            self.outputs[step.name] = output
            self._append({"kind": "node_done", "node": step.name, "output": output})
            if on_event:
                on_event("node_done", step.name)
        self.completed = True
        self._append({"kind": "run_completed"})
        return dict(self.outputs)


def resume_run(run_id: str, steps: Sequence[Step], runs_dir: str, ledger=None) -> WorkflowRun:
    path = os.path.join(runs_dir, run_id, "checkpoint.log")
    if not os.path.exists(path):
        raise CheckpointError(f"no checkpoint found for run {run_id!r}")
    return WorkflowRun(run_id, steps, runs_dir, ledger=ledger)


# ---------------------------------------------------------------------------
# Declarative flow documents


def load_flow(path: str) -> dict:
    """Load a *.flow workflow description (JSON).

    Shape: {"name": ..., "nodes": [{"name", "template", "tier", "schema",
    "after": [names], "bindings": {slot: binding}}]} where a binding is
    {"const": text} | {"input": key} | {"from": "node" or "node.field"}.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise OrchestratorError(f"{path}: a flow document needs a top-level 'nodes' list")
    names = set()
    for node in doc["nodes"]:
        for key in ("name", "template"):
            if key not in node:
                raise OrchestratorError(f"{path}: every flow node needs a {key!r}")
        if node["name"] in names:
            raise OrchestratorError(f"{path}: duplicate node name {node['name']!r}")
        names.add(node["name"])
        if node["template"] not in prompts.REGISTRY:
            raise OrchestratorError(
                f"{path}: node {node['name']!r} uses unknown template {node['template']!r}"
            )
        for dep in node.get("after", []):
            if dep not in names:
                raise OrchestratorError(
                    f"{path}: node {node['name']!r} runs after undefined node {dep!r}"
                )
    return doc


def _resolve_binding(binding: Any, inputs: dict, ctx: dict) -> str:
    if isinstance(binding, dict):
        if "const" in binding:
            return str(binding["const"])
        if "input" in binding:
            key = binding["input"]
            if key not in inputs:
                raise OrchestratorError(f"flow input {key!r} not supplied")
            return str(inputs[key])
        if "from" in binding:
            ref = binding["from"]
            node_name, _, fieldpath = ref.partition(".")
            value = ctx[node_name]
            for part in fieldpath.split(".") if fieldpath else []:
                value = value[part]
            return value if isinstance(value, str) else json.dumps(value)
    raise OrchestratorError(f"unintelligible binding: {binding!r}")


def flow_steps(hub, doc: dict, inputs: dict) -> list[Step]:
    """Compile a flow document into executable steps for a WorkflowRun."""

    def make_fn(node_doc: dict) -> Callable[[dict], Any]:
        agent = AgentNode(
            name=node_doc["name"],
            template=node_doc["template"],
            tier=node_doc.get("tier", "fast"),
            output_schema=node_doc.get("schema", "text"),
            max_repair_rounds=int(node_doc.get("max_repair_rounds", 2)),
        )

        def fn(ctx: dict) -> Any:
            bindings = {
                slot: _resolve_binding(b, inputs, ctx)
                for slot, b in node_doc.get("bindings", {}).items()
            }
            return run_node(hub, agent, bindings)

        return fn

    return [
        Step(name=n["name"], fn=make_fn(n), after=tuple(n.get("after", [])))
        for n in doc["nodes"]
    ]
