"""Model and search providers: live HTTP clients plus deterministic mocks.

The mock provider is the workhorse of the test suite and offline runs. Its
outputs are pure functions of (request content, seed) via hashing, never of
call order, so a resumed run reproduces exactly what an uninterrupted run
would have produced. Every prompt family gets a schema-valid mock response
derived from the request's slots.
"""

from __future__ import annotations

import json
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional, Sequence
from urllib.parse import urlparse

import httpx

from . import prompts
from .config import (
    DEEP_KEY_ENV,
    FAST_KEY_ENV,
    SEARCH_KEY_ENV,
    EndpointConfig,
    ProjectConfig,
    RetryConfig,
)
from .model import SourceRef
from .util import (
    STOPWORDS,
    bounded_map,
    salient_tokens,
    stable_hash,
    token_set,
    tokenize,
    unit_float,
)


class ProviderError(RuntimeError):
    pass


class TransportError(ProviderError):
    """Transient failure: network, timeout, 429/5xx. Retried."""


class ContentError(ProviderError):
    """The provider answered but refused or returned an unusable payload."""


class SearchError(ProviderError):
    pass


@dataclass
class ModelRequest:
    tier: str  # fast | deep
    system_message: str
    user_message: str
    temperature: float = 0.0
    max_output_tokens: int = 1024
    seed: Optional[int] = None
    # Metadata for mock dispatch and the template-usage audit. Live HTTP
    # providers never transmit these.
    template: str = ""
    slots: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.tier not in ("fast", "deep"):
            raise ProviderError(f"unknown model tier: {self.tier}")
        if not self.system_message.strip() or not self.user_message.strip():
            raise ProviderError("system and user messages must be non-empty")
        if not 0 <= self.temperature <= 2:
            raise ProviderError("temperature must be within [0, 2]")


@dataclass
class ModelResponse:
    text: str
    input_tokens: int
    output_tokens: int
    provider_name: str


class CostLedger:
    """Token and spend accounting in integer micro-currency units."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.per_tier: dict[str, dict[str, int]] = {}
        self.total_micro: int = 0

    def record(self, tier: str, input_tokens: int, output_tokens: int, endpoint: EndpointConfig) -> int:
        cost = (
            input_tokens * endpoint.price_in_per_token
            + output_tokens * endpoint.price_out_per_token
        )
        with self._lock:
            bucket = self.per_tier.setdefault(
                tier, {"input_tokens": 0, "output_tokens": 0, "micro": 0}
            )
            bucket["input_tokens"] += input_tokens
            bucket["output_tokens"] += output_tokens
            bucket["micro"] += cost
            self.total_micro += cost
        return cost

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "per_tier": {k: dict(v) for k, v in self.per_tier.items()},
                "total_micro": self.total_micro,
            }

    def restore(self, snapshot: dict) -> None:
        """Reset accounting to a saved snapshot (resume, never rollback)."""
        with self._lock:
            self.per_tier = {
                k: dict(v) for k, v in snapshot.get("per_tier", {}).items()
            }
            self.total_micro = int(snapshot.get("total_micro", 0))


def with_retries(
    fn: Callable[[], Any],
    retry: RetryConfig,
    sleep: Callable[[float], None] = time.sleep,
    rng: Optional[random.Random] = None,
):
    """Run fn, retrying TransportError with exponential backoff.

    Full jitter: each delay is uniform in [0, base * factor^attempt], which
    spreads reconnect storms without stretching the worst case.
    """
    rng = rng or random.Random()
    last: Optional[Exception] = None
    for attempt in range(retry.max_attempts):
        try:
            return fn()
        except TransportError as exc:
            last = exc
            if attempt == retry.max_attempts - 1:
                break
            delay = retry.base_delay_s * (retry.backoff_factor**attempt)
            if retry.jitter == "full":
                delay = rng.uniform(0.0, delay)
            sleep(delay)
    raise TransportError(
        f"gave up after {retry.max_attempts} attempts: {last}"
    ) from last


# ---------------------------------------------------------------------------
# Live HTTP model provider


class HttpModelProvider:
    """Chat-completion style HTTP client for one tier endpoint.

    Request body: {"messages": [{"role": "system"|"user", "content": ...}],
    "temperature": float, "max_tokens": int, "seed": int?}.
    Response: {"text": str, "usage": {"input_tokens": int, "output_tokens": int}}
    (the OpenAI-style choices/usage shape is accepted too).
    """

    def __init__(
        self,
        tier: str,
        endpoint: EndpointConfig,
        retry: RetryConfig,
        api_key_env: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        timeout_s: float = 120.0,
    ):
        if not endpoint.url:
            raise ProviderError(f"no endpoint configured for tier {tier}")
        self.tier = tier
        self.name = f"http-{tier}"
        self.endpoint = endpoint
        self.retry = retry
        self._sleep = sleep
        key_env = api_key_env or {"fast": FAST_KEY_ENV, "deep": DEEP_KEY_ENV}[tier]
        self._api_key = os.environ.get(key_env)
        self._client = httpx.Client(transport=transport, timeout=timeout_s)

    def complete(self, request: ModelRequest) -> ModelResponse:
        body = {
            "messages": [
                {"role": "system", "content": request.system_message},
                {"role": "user", "content": request.user_message},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        if request.seed is not None:
            body["seed"] = request.seed
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        def attempt() -> ModelResponse:
            try:
                resp = self._client.post(self.endpoint.url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                raise TransportError(f"{self.name}: {exc}") from exc
            if resp.status_code == 429 or resp.status_code >= 500:
                raise TransportError(f"{self.name}: HTTP {resp.status_code}")
            if resp.status_code >= 400:
                raise ContentError(f"{self.name}: HTTP {resp.status_code}: {resp.text[:300]}")
            data = resp.json()
            if "error" in data:
                raise ContentError(f"{self.name}: provider refusal: {data['error']}")
            if "text" in data:
                text = data["text"]
                usage = data.get("usage", {})
                return ModelResponse(
                    text=text,
                    input_tokens=int(usage.get("input_tokens", 0)),
                    output_tokens=int(usage.get("output_tokens", 0)),
                    provider_name=self.name,
                )
            try:
                text = data["choices"][0]["message"]["content"]
                usage = data.get("usage", {})
                return ModelResponse(
                    text=text,
                    input_tokens=int(usage.get("prompt_tokens", 0)),
                    output_tokens=int(usage.get("completion_tokens", 0)),
                    provider_name=self.name,
                )
            except (KeyError, IndexError, TypeError) as exc:
                raise ContentError(f"{self.name}: unrecognized response shape") from exc

        return with_retries(attempt, self.retry, sleep=self._sleep)

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# Deterministic mock model provider


def _canon(text: str) -> str:
    return " ".join(tokenize(text))


def mock_latent_quality(item_text: str, seed: int) -> float:
    """Hidden quality in [0, 1) for an item text under a seed.

    Pure hash of the canonicalized text, so the voter built on it defines a
    strict total order over distinct texts: the oracle for convergence tests.
    """
    return unit_float("latent-quality", seed, _canon(item_text))


@dataclass
class MockRecording:
    """Canned response for a specific template + user-message substring."""

    template: str
    user_contains: str
    response: str


def _pick(options: Sequence[str], *key: Any) -> str:
    return options[stable_hash(*key) % len(options)]


def _rotate(seq: list, n: int) -> list:
    if not seq:
        return seq
    n %= len(seq)
    return seq[n:] + seq[:n]


def _sections(page_text: str) -> list[tuple[str, list[str]]]:
    """Split stripped page text into (heading, lines) sections on '## ' marks."""
    sections: list[tuple[str, list[str]]] = []
    current: Optional[tuple[str, list[str]]] = None
    for line in page_text.splitlines():
        line = line.strip()
        if line.startswith("## "):
            if current:
                sections.append(current)
            current = (line[3:].strip(), [])
        elif line and current is not None:
            current[1].append(line)
    if current:
        sections.append(current)
    return sections


def _first_sentence(text: str) -> str:
    for sep in (". ", "! ", "? "):
        idx = text.find(sep)
        if idx != -1:
            return text[: idx + 1]
    return text


_QUERY_SHAPES = {
    "general": [
        "{kw} challenges and solutions",
        "how to address {kw}",
        "{kw} policy approaches",
        "strategies for improving {kw}",
        "{kw} case studies",
        "{kw} reform proposals",
        "what is driving {kw}",
        "{kw} expert analysis",
        "lessons learned {kw}",
        "{kw} best practices",
    ],
    "scientific": [
        "{kw} peer reviewed research",
        "{kw} empirical study",
        "{kw} systematic review",
        "{kw} journal article",
        "{kw} research findings",
        "{kw} longitudinal analysis",
        "{kw} academic literature",
        "{kw} meta analysis",
        "{kw} quantitative evidence",
        "{kw} field experiment",
    ],
    "openData": [
        "{kw} statistics dataset",
        "{kw} open data portal",
        "{kw} survey data",
        "{kw} indicators by country",
        "{kw} public records data",
        "{kw} census figures",
        "{kw} time series data",
        "{kw} comparative index",
        "{kw} data dashboard",
        "{kw} machine readable dataset",
    ],
    "news": [
        "{kw} latest news",
        "{kw} recent developments",
        "{kw} current coverage",
        "{kw} this year",
        "{kw} breaking analysis",
        "{kw} press reports",
        "{kw} investigative reporting",
        "{kw} recent incidents",
        "{kw} ongoing debate",
        "{kw} newest policy moves",
    ],
}

_PRO_SHAPES = [
    "Directly strengthens {kw} where current efforts fall short.",
    "Builds durable public support because {kw} outcomes become visible quickly.",
    "Scales across regions since {kw} programs reuse existing institutions.",
    "Creates accountability by making {kw} progress measurable.",
    "Attracts partners because {kw} benefits are broadly shared.",
    "Reduces long-term costs by preventing {kw} failures early.",
]

_CON_SHAPES = [
    "Requires sustained funding that {kw} budgets rarely guarantee.",
    "Risks resistance from stakeholders who benefit from the status quo around {kw}.",
    "Depends on technical and human capacity that {kw} institutions may lack.",
    "Could move slowly because {kw} reforms need legislative approval.",
    "May struggle to reach communities least engaged with {kw} today.",
    "Success is hard to attribute when many {kw} initiatives run in parallel.",
]

_MUTATION_SHAPES = [
    ("Strengthen", "with Independent Oversight"),
    ("Expand", "through Local Partnerships"),
    ("Advance", "via Public Reporting Requirements"),
    ("Reinforce", "with Sunset Review Clauses"),
    ("Accelerate", "through Pilot Programs"),
    ("Anchor", "in Community Institutions"),
    ("Modernize", "with Open Digital Infrastructure"),
    ("Safeguard", "through Citizen Audit Panels"),
]

_MUTATION_TWISTS = [
    "Adds an independent oversight body that publishes findings on a fixed schedule.",
    "Shifts delivery to local partnerships so adoption fits each community.",
    "Introduces mandatory public reporting so progress is visible to everyone.",
    "Adds sunset clauses forcing periodic review and renewal of the program.",
    "Starts with small pilot programs that expand only after measured success.",
    "Roots the program in existing community institutions to lower startup friction.",
    "Rebuilds the core workflow on open digital infrastructure for transparency.",
    "Creates citizen audit panels with real authority to inspect outcomes.",
]

_POLICY_SHAPES = [
    "{kw} Accountability and Transparency Act",
    "{kw} Act",
    "National {kw} Initiative",
    "{kw} Standards and Review Act",
    "Public {kw} Partnership Program",
]

_FRESH_SHAPES = [
    (
        "Establish {kw} Resource Centers",
        "Create staffed centers that give residents direct help with {kw}, open"
        " evenings and weekends, with outcomes published quarterly.",
    ),
    (
        "Fund {kw} Fellowship Programs",
        "Place trained fellows inside local institutions for a year to work on"
        " {kw}, building capacity that remains after the fellowship ends.",
    ),
    (
        "Launch {kw} Rapid Response Teams",
        "Stand up small cross-functional teams that intervene within days when"
        " {kw} problems surface, with a public log of every intervention.",
    ),
    (
        "Create {kw} Matching Grants",
        "Match every locally raised amount for {kw} projects one-to-one, so"
        " communities set priorities while funding doubles.",
    ),
]

# Defect marker grammar used by the mock producer/validator pair. Each
# validator family recognizes exactly one defect type.
DEFECT_MARKERS = {
    "validate_correctness": "wrong-fact",
    "validate_completeness": "omission",
    "validate_hallucination": "hallucinated-detail",
}


def defect_marker(kind: str) -> str:
    return f"[[DEFECT:{kind}]]"


class MockModelProvider:
    """Seeded mock emitting schema-valid outputs for every prompt family.

    Outputs are derived by hashing the request content with the seed, never
    from a sequential RNG stream, so any subset of requests replayed in any
    order produces identical responses.
    """

    def __init__(
        self,
        tier: str,
        seed: int,
        recordings: Iterable[MockRecording] = (),
        defect_rate: float = 0.0,
        defect_templates: Iterable[str] = ("compress",),
        viability_floor: float = 0.02,
        neither_margin: float = 0.0,
    ):
        self.tier = tier
        self.name = f"mock-{tier}"
        self.seed = seed
        self.recordings = list(recordings)
        self.defect_rate = defect_rate
        self.defect_templates = set(defect_templates)
        self.viability_floor = viability_floor
        self.neither_margin = neither_margin
        self.calls = 0

    def complete(self, request: ModelRequest) -> ModelResponse:
        self.calls += 1
        seed = request.seed if request.seed is not None else self.seed
        for rec in self.recordings:
            if rec.template == request.template and rec.user_contains in request.user_message:
                return self._respond(request, rec.response)
        text = self._dispatch(request, seed)
        if (
            self.defect_rate > 0
            and request.template in self.defect_templates
            and unit_float("defect", seed, request.user_message) < self.defect_rate
        ):
            kind = _pick(
                list(DEFECT_MARKERS.values()), "defect-kind", seed, request.user_message
            )
            text = f"{text} {defect_marker(kind)}"
        return self._respond(request, text)

    def _respond(self, request: ModelRequest, text: str) -> ModelResponse:
        return ModelResponse(
            text=text,
            input_tokens=math.ceil(
                (len(request.system_message) + len(request.user_message)) / 4
            ),
            output_tokens=math.ceil(len(text) / 4),
            provider_name=self.name,
        )

    # ------------------------------------------------------------- dispatch

    def _dispatch(self, request: ModelRequest, seed: int) -> str:
        slots = request.slots
        handler = {
            "query_generation": self._query_generation,
            "query_pairwise": self._pairwise,
            "pairwise_solution": self._pairwise,
            "pairwise_subproblem": self._pairwise,
            "relevance": self._relevance,
            "extract_subproblems": self._extract_subproblems,
            "extract_solutions": self._extract_solutions,
            "extract_evidence": self._extract_evidence,
            "viability": self._viability,
            "mutation": self._mutation,
            "crossover": self._crossover,
            "pros_cons": self._pros_cons,
            "fresh_solutions": self._fresh_solutions,
            "policy_from_solutions": self._policy_from_solutions,
            "judge": self._judge,
            "compress": self._compress,
            "validate_correctness": self._validator,
            "validate_completeness": self._validator,
            "validate_hallucination": self._validator,
        }.get(request.template)
        if handler is None:
            return f"mock-output-{stable_hash(request.system_message, request.user_message, seed):016x}"
        return handler(request, slots, seed)

    def _query_generation(self, request: ModelRequest, slots: dict, seed: int) -> str:
        subject = slots["subject"]
        category = slots["category"]
        purpose = slots["purpose"]
        n = int(slots["n"])
        toks = salient_tokens(subject, 10) or ["topic"]
        shapes = _QUERY_SHAPES.get(category, _QUERY_SHAPES["general"])
        purpose_tail = " ".join(salient_tokens(purpose, 3))
        queries = []
        for i in range(n):
            kw = " ".join(_rotate(toks, i)[:3])
            shape = shapes[(i + stable_hash("qshape", seed, subject, category)) % len(shapes)]
            text = shape.format(kw=kw)
            if purpose_tail and i % 2 == 1:
                text = f"{text} {purpose_tail}"
            queries.append(text)
        return json.dumps(queries)

    def _pairwise(self, request: ModelRequest, slots: dict, seed: int) -> str:
        one = slots["component_one"]
        two = slots["component_two"]
        q1 = mock_latent_quality(one, seed)
        q2 = mock_latent_quality(two, seed)
        if abs(q1 - q2) <= self.neither_margin:
            return "Neither"
        return "One" if q1 > q2 else "Two"

    def _relevance(self, request: ModelRequest, slots: dict, seed: int) -> str:
        goal = set(salient_tokens(slots["goal"], 20))
        page = token_set(slots["page_title"] + " " + slots["excerpt"])
        if not goal or not page:
            return "0"
        return str(round(100 * len(goal & page) / len(goal)))

    def _extract_subproblems(self, request: ModelRequest, slots: dict, seed: int) -> str:
        items = []
        for heading, lines in _sections(slots["page_text"]):
            entities = []
            body: list[str] = []
            for line in lines:
                if line.startswith("Affected:"):
                    spec_text = line[len("Affected:") :].strip()
                    name, _, effects = spec_text.partition("|")
                    entities.append(
                        {
                            "name": name.strip(),
                            "negativeEffects": [
                                e.strip() for e in effects.split(";") if e.strip()
                            ],
                        }
                    )
                elif not line.startswith("- ") and not line.startswith(("Benefit:", "Obstacle:")):
                    body.append(line)
            if not body:
                continue
            items.append(
                {
                    "title": heading,
                    "description": " ".join(body),
                    "affectedEntities": entities,
                }
            )
        return json.dumps(items)

    def _extract_solutions(self, request: ModelRequest, slots: dict, seed: int) -> str:
        items = []
        for heading, lines in _sections(slots["page_text"]):
            benefit = ""
            obstacle = ""
            body: list[str] = []
            for line in lines:
                if line.startswith("Benefit:"):
                    benefit = line[len("Benefit:") :].strip()
                elif line.startswith("Obstacle:"):
                    obstacle = line[len("Obstacle:") :].strip()
                elif not line.startswith(("Affected:", "- ")):
                    body.append(line)
            if not body:
                continue
            kw = " ".join(salient_tokens(heading, 3))
            items.append(
                {
                    "title": heading,
                    "description": " ".join(body),
                    "mainBenefitOfSolution": benefit
                    or f"Delivers concrete progress on {kw} that people can see.",
                    "mainObstacleToSolutionAdoption": obstacle
                    or f"Securing long-term commitment for {kw} work is difficult.",
                }
            )
        return json.dumps(items)

    def _extract_evidence(self, request: ModelRequest, slots: dict, seed: int) -> str:
        category_tokens = set(salient_tokens(slots["category"], 6))
        items = []
        for heading, lines in _sections(slots["page_text"]):
            heading_tokens = set(salient_tokens(heading, 6))
            if not heading_tokens:
                continue
            if not (
                heading_tokens <= category_tokens or category_tokens <= heading_tokens
            ):
                continue
            bullets = [l[2:].strip() for l in lines if l.startswith("- ")]
            body = [l for l in lines if not l.startswith("- ")]
            summary = _first_sentence(" ".join(body)) if body else (
                bullets[0] if bullets else ""
            )
            if not summary and not bullets:
                continue
            items.append({"summary": summary, "bullets": bullets})
        return json.dumps(items)

    def _viability(self, request: ModelRequest, slots: dict, seed: int) -> str:
        quality = mock_latent_quality(slots["solution"], seed)
        return "No" if quality < self.viability_floor else "Yes"

    def _mutation(self, request: ModelRequest, slots: dict, seed: int) -> str:
        parent = json.loads(slots["solution_json"])
        key = ("mutation", seed, request.user_message)
        verb, suffix = _MUTATION_SHAPES[stable_hash(*key) % len(_MUTATION_SHAPES)]
        twist = _MUTATION_TWISTS[stable_hash(*key, "twist") % len(_MUTATION_TWISTS)]
        core = " ".join(w.capitalize() for w in salient_tokens(parent["title"], 4))
        first = _first_sentence(parent.get("description", "")) or parent.get("description", "")
        child = {
            "title": f"{verb} {core} {suffix}",
            "description": f"{first} {twist}",
            "mainBenefitOfSolution": (
                f"Keeps what works about {core.lower()} while fixing its weakest link."
            ),
            "mainObstacleToSolutionAdoption": parent.get(
                "mainObstacleToSolutionAdoption",
                "Requires political will to sustain beyond one budget cycle.",
            ),
        }
        return json.dumps(child, indent=2)

    def _crossover(self, request: ModelRequest, slots: dict, seed: int) -> str:
        one = json.loads(slots["solution_one_json"])
        two = json.loads(slots["solution_two_json"])
        lead = " ".join(w.capitalize() for w in salient_tokens(one["title"], 3))
        tail = " ".join(w.capitalize() for w in salient_tokens(two["title"], 3))
        verb = _pick(
            ["Combining", "Uniting", "Pairing", "Integrating"],
            "crossover",
            seed,
            request.user_message,
        )
        child = {
            "title": f"{verb} {lead} with {tail}",
            "description": (
                f"{_first_sentence(one.get('description', ''))} "
                f"{_first_sentence(two.get('description', ''))} Together these two"
                " strands reinforce each other instead of competing for attention."
            ),
            "mainBenefitOfSolution": (
                f"Brings together {lead.lower()} and {tail.lower()} so their gains compound."
            ),
            "mainObstacleToSolutionAdoption": max(
                one.get("mainObstacleToSolutionAdoption", ""),
                two.get("mainObstacleToSolutionAdoption", ""),
                key=len,
            )
            or "Coordinating two delivery tracks demands strong program management.",
        }
        return json.dumps(child, indent=2)

    def _pros_cons(self, request: ModelRequest, slots: dict, seed: int) -> str:
        n = int(slots["n_each"])
        kw = " ".join(salient_tokens(slots["solution"], 3)) or "the program"
        base = stable_hash("proscons", seed, slots["solution"])
        pros = [_PRO_SHAPES[(base + i) % len(_PRO_SHAPES)].format(kw=kw) for i in range(n)]
        cons = [_CON_SHAPES[(base + i) % len(_CON_SHAPES)].format(kw=kw) for i in range(n)]
        return json.dumps({"pros": pros, "cons": cons}, indent=2)

    def _fresh_solutions(self, request: ModelRequest, slots: dict, seed: int) -> str:
        n = int(slots["n"])
        kw = " ".join(salient_tokens(slots["problem"], 2)).title() or "Community"
        base = stable_hash("fresh", seed, request.user_message)
        items = []
        for i in range(n):
            title_shape, desc_shape = _FRESH_SHAPES[(base + i) % len(_FRESH_SHAPES)]
            salt = (base + i) % 97
            items.append(
                {
                    "title": f"{title_shape.format(kw=kw)} ({salt})",
                    "description": desc_shape.format(kw=kw.lower()),
                    "mainBenefitOfSolution": f"Opens a new route to progress on {kw.lower()}.",
                    "mainObstacleToSolutionAdoption": "Needs an initial champion inside local government.",
                }
            )
        return json.dumps(items, indent=2)

    def _policy_from_solutions(self, request: ModelRequest, slots: dict, seed: int) -> str:
        lines = [l for l in slots["numbered_solutions"].splitlines() if l.strip()]
        titles = []
        for line in lines:
            head, _, rest = line.partition(". ")
            if head.strip().isdigit() and rest:
                titles.append(rest.split(" - ")[0].strip())
        count = max(1, len(titles))
        n = int(slots["n"])
        base = stable_hash("policy", seed, slots["numbered_solutions"])
        items = []
        for i in range(n):
            src = 1 + (base + i) % count
            extra = 1 + (base + i * 7 + 3) % count
            based_on = sorted({src, extra} if extra != src and count > 1 else {src})
            kw = " ".join(
                w.capitalize() for w in salient_tokens(titles[src - 1] if titles else "public", 3)
            )
            shape = _POLICY_SHAPES[(base + i) % len(_POLICY_SHAPES)]
            items.append(
                {
                    "title": shape.format(kw=kw),
                    "description": (
                        f"Codifies the approach of solution {src} into standing policy:"
                        f" sets statutory duties, names a responsible body, and funds"
                        f" implementation with annual public reporting on outcomes."
                    ),
                    "basedOnSolutions": based_on,
                }
            )
        return json.dumps(items, indent=2)

    def _judge(self, request: ModelRequest, slots: dict, seed: int) -> str:
        req_tokens = [t for t in tokenize(slots["requirement_text"]) if t not in STOPWORDS]
        sol_tokens = token_set(slots["solution_text"])
        if not req_tokens:
            percent = 0
        else:
            covered = sum(1 for t in req_tokens if t in sol_tokens)
            percent = round(100 * covered / len(req_tokens))
        return json.dumps(
            [
                {
                    "requirementTitle": slots["requirement_title"],
                    "solutionCoversPercent": percent,
                }
            ]
        )

    def _compress(self, request: ModelRequest, slots: dict, seed: int) -> str:
        words = slots["text"].split()
        kept = [w for w in words if w.lower().strip(".,;:!?") not in STOPWORDS]
        return " ".join(kept) if kept else slots["text"]

    def _validator(self, request: ModelRequest, slots: dict, seed: int) -> str:
        marker = defect_marker(DEFECT_MARKERS[request.template])
        if marker in slots["candidate"]:
            return f"FAIL: the output contains a {DEFECT_MARKERS[request.template]} defect."
        return "PASS"


# ---------------------------------------------------------------------------
# Search engines


def _valid_url(url: str) -> bool:
    parsed = urlparse(url)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


class FixtureSearchEngine:
    """Search over a local fixture corpus.

    The corpus index maps exact query strings to ordered URL lists; queries
    not present fall back to keyword-overlap scoring against page metadata,
    so generated query variants still find the relevant pages.
    """

    def __init__(self, corpus_dir: str):
        self.corpus_dir = corpus_dir
        index_path = os.path.join(corpus_dir, "index.json")
        try:
            with open(index_path, "r", encoding="utf-8") as fh:
                self.index = json.load(fh)
        except OSError as exc:
            raise SearchError(f"fixture corpus has no index: {index_path}") from exc
        self.queries: dict[str, list[str]] = self.index.get("queries", {})
        self.pages: dict[str, dict] = self.index.get("pages", {})

    def search(self, query_text: str, max_results: int) -> list[SourceRef]:
        if not query_text.strip():
            raise SearchError("empty query")
        if max_results <= 0:
            return []
        urls = self.queries.get(query_text)
        if urls is None:
            q = set(tokenize(query_text)) - STOPWORDS
            scored = []
            for url, meta in self.pages.items():
                page_tokens = set(meta.get("keywords", [])) | token_set(meta.get("title", ""))
                score = len(q & page_tokens)
                if score > 0:
                    scored.append((-score, url))
            urls = [u for _, u in sorted(scored)]
        out = []
        for url in urls[:max_results]:
            meta = self.pages.get(url, {})
            out.append(SourceRef(url=url, title=meta.get("title", "")))
        return out


class HttpSearchEngine:
    """GET {url}?q=...&limit=... -> {"results": [{"url": ..., "title": ...}]}"""

    def __init__(
        self,
        endpoint: EndpointConfig,
        retry: RetryConfig,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        timeout_s: float = 30.0,
    ):
        if not endpoint.url:
            raise SearchError("no search endpoint configured")
        self.endpoint = endpoint
        self.retry = retry
        self._sleep = sleep
        self._client = httpx.Client(transport=transport, timeout=timeout_s)

    def search(self, query_text: str, max_results: int) -> list[SourceRef]:
        if not query_text.strip():
            raise SearchError("empty query")
        if max_results <= 0:
            return []
        headers = {}
        key = os.environ.get(SEARCH_KEY_ENV)
        if key:
            headers["X-Api-Key"] = key

        def attempt() -> list[SourceRef]:
            try:
                resp = self._client.get(
                    self.endpoint.url,
                    params={"q": query_text, "limit": max_results},
                    headers=headers,
                )
            except httpx.HTTPError as exc:
                raise TransportError(f"search: {exc}") from exc
            if resp.status_code == 429 or resp.status_code >= 500:
                raise TransportError(f"search: HTTP {resp.status_code}")
            if resp.status_code >= 400:
                raise SearchError(f"search: HTTP {resp.status_code}")
            results = resp.json().get("results", [])
            out = []
            for row in results[:max_results]:
                url = row.get("url", "")
                if _valid_url(url):
                    out.append(SourceRef(url=url, title=row.get("title", "")))
            return out

        try:
            return with_retries(attempt, self.retry, sleep=self._sleep)
        except TransportError as exc:
            raise SearchError(str(exc)) from exc

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# Provider hub


class ProviderHub:
    """Routes requests to the right tier, meters cost, audits template use.

    The hub is the only path the pipeline uses to talk to providers, which
    is what makes the routing and reuse invariants checkable: every call
    records (template, owner, tier).
    """

    def __init__(
        self,
        fast: Any,
        deep: Any,
        search_engine: Any = None,
        config: Optional[ProjectConfig] = None,
        ledger: Optional[CostLedger] = None,
    ):
        self.config = config or ProjectConfig()
        self.providers = {"fast": fast, "deep": deep}
        self.search_engine = search_engine
        self.ledger = ledger or CostLedger()
        self.template_uses: list[dict] = []
        self._audit_lock = threading.Lock()
        self._sem = threading.BoundedSemaphore(
            self.config.providers.max_concurrent_requests
        )

    def complete(self, request: ModelRequest) -> ModelResponse:
        provider = self.providers.get(request.tier)
        if provider is None:
            raise ProviderError(f"no provider configured for tier {request.tier}")
        with self._sem:
            response = provider.complete(request)
        endpoint = (
            self.config.providers.fast
            if request.tier == "fast"
            else self.config.providers.deep
        )
        self.ledger.record(
            request.tier, response.input_tokens, response.output_tokens, endpoint
        )
        with self._audit_lock:
            self.template_uses.append(
                {
                    "template": request.template,
                    "owner": prompts.owner_of(request.template)
                    if request.template in prompts.REGISTRY
                    else "",
                    "tier": request.tier,
                }
            )
        return response

    def complete_prompt(
        self,
        rendered: prompts.RenderedPrompt,
        tier: str,
        temperature: float = 0.0,
        max_output_tokens: int = 1024,
    ) -> ModelResponse:
        return self.complete(
            ModelRequest(
                tier=tier,
                system_message=rendered.system,
                user_message=rendered.user,
                temperature=temperature,
                max_output_tokens=max_output_tokens,
                template=rendered.template,
                slots=rendered.slots,
            )
        )

    def search(self, query_text: str, max_results: int) -> list[SourceRef]:
        if self.search_engine is None:
            raise SearchError("no search engine configured")
        return self.search_engine.search(query_text, max_results)

    def map(self, fn: Callable, items: Sequence) -> list:
        """Order-preserving parallel map under the provider concurrency bound."""
        return bounded_map(fn, items, self.config.providers.max_concurrent_requests)

    def uses_since(self, mark: int) -> list[dict]:
        return self.template_uses[mark:]

    def audit_mark(self) -> int:
        return len(self.template_uses)


def offline_hub(
    config: Optional[ProjectConfig] = None,
    seed: int = 0,
    corpus_dir: Optional[str] = None,
    recordings: Iterable[MockRecording] = (),
    defect_rate: float = 0.0,
    neither_margin: float = 0.0,
) -> ProviderHub:
    """Hub wired entirely to deterministic mocks; no network access."""
    config = config or ProjectConfig()
    recordings = list(recordings)
    fast = MockModelProvider(
        "fast", seed, recordings=recordings, defect_rate=defect_rate,
        neither_margin=neither_margin,
    )
    deep = MockModelProvider(
        "deep", seed, recordings=recordings, defect_rate=defect_rate,
        neither_margin=neither_margin,
    )
    engine = FixtureSearchEngine(corpus_dir) if corpus_dir else None
    return ProviderHub(fast, deep, engine, config=config)


def live_hub(config: ProjectConfig) -> ProviderHub:
    """Hub wired to the configured HTTP endpoints."""
    retry = config.providers.retry
    fast = HttpModelProvider("fast", config.providers.fast, retry)
    deep = HttpModelProvider("deep", config.providers.deep, retry)
    engine = (
        HttpSearchEngine(config.providers.search, retry)
        if config.providers.search.url
        else None
    )
    return ProviderHub(fast, deep, engine, config=config)
