"""Automated web research: query generation, search, tiered page scanning,
typed extraction, and deduplication.

The stage flow is: generate search queries per category, rank them by
tournament, search the top queries, fetch and scan every result page (cheap
tier first, the most relevant fraction re-scanned on the deep tier), extract
typed items with provenance, dedupe, and rank the survivors.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import urllib.robotparser
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Optional, Sequence
from urllib.parse import urlparse

import httpx

from . import prompts
from .config import ProjectConfig
from .model import (
    ORIGIN_WEB,
    AffectedEntity,
    EvidenceItem,
    SearchQuery,
    SourceRef,
    SubProblem,
)
from .orchestrator import AgentNode, NodeError, run_node
from .ranking import model_pair_voter, run_tournament, sorted_by_rating
from .util import (
    RateGate,
    chunk_words,
    derive_rng,
    jaccard,
    now_rfc3339,
    token_set,
)

log = logging.getLogger(__name__)


class ResearchError(RuntimeError):
    pass


class FetchError(ResearchError):
    pass


class StageError(ResearchError):
    """A research stage produced nothing usable."""


# ---------------------------------------------------------------------------
# Text chunking (paragraph-preserving)


def chunk_text(text: str, budget_words: int, overlap_words: int) -> list[str]:
    """Split text into word-budgeted chunks along line boundaries.

    Lines (paragraphs, headings, bullets) are never split unless a single
    line alone exceeds the budget; consecutive chunks share roughly
    overlap_words of trailing context so items straddling a boundary are
    still seen whole by at least one chunk.
    """
    if budget_words <= 0:
        raise ValueError("budget_words must be positive")
    if not 0 <= overlap_words < budget_words:
        raise ValueError("overlap_words must be in [0, budget_words)")
    lines: list[str] = []
    for line in text.splitlines():
        words = line.split()
        if len(words) > budget_words:
            lines.extend(" ".join(c) for c in chunk_words(words, budget_words, 0))
        else:
            lines.append(line)
    chunks: list[str] = []
    current: list[str] = []
    count = 0
    for line in lines:
        n = len(line.split())
        if current and count + n > budget_words:
            chunks.append("\n".join(current))
            # Carry whole trailing lines totalling >= overlap_words back in.
            carried: list[str] = []
            carried_words = 0
            for prev in reversed(current):
                if carried_words >= overlap_words:
                    break
                carried.insert(0, prev)
                carried_words += len(prev.split())
            current = carried
            count = carried_words
        current.append(line)
        count += n
    if any(line.strip() for line in current):
        chunks.append("\n".join(current))
    return chunks


# ---------------------------------------------------------------------------
# HTML to text


class _TextExtractor(HTMLParser):
    """Strip markup to the line-oriented plain text the extractors read:
    h1–h3 become '## ' headings, list items become '- ' bullets."""

    _SKIP = {"script", "style", "noscript", "template"}
    _BREAKS = {"p", "div", "section", "article", "br", "tr", "table", "ul", "ol",
               "header", "footer", "blockquote"}

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.lines: list[str] = []
        self._current: list[str] = []
        self._skip_depth = 0
        self._in_title = False
        self.title = ""

    def _flush(self, prefix: str = "") -> None:
        text = " ".join("".join(self._current).split())
        self._current = []
        if text:
            self.lines.append(prefix + text)

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in self._SKIP:
            self._skip_depth += 1
        elif tag == "title":
            self._in_title = True
        elif tag in ("h1", "h2", "h3", "li") or tag in self._BREAKS:
            self._flush()

    def handle_endtag(self, tag: str) -> None:
        if tag in self._SKIP:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag == "title":
            self._in_title = False
        elif tag in ("h1", "h2", "h3"):
            self._flush("## ")
        elif tag == "li":
            self._flush("- ")
        elif tag in self._BREAKS:
            self._flush()

    def handle_data(self, data: str) -> None:
        if self._skip_depth:
            return
        if self._in_title:
            self.title += data
        else:
            self._current.append(data)

    def text(self) -> str:
        self._flush()
        return "\n".join(self.lines)


def html_to_text(html: str) -> tuple[str, str]:
    """Return (title, line-oriented plain text) for an HTML document."""
    extractor = _TextExtractor()
    extractor.feed(html)
    return extractor.title.strip(), extractor.text()


@dataclass
class FetchedPage:
    url: str
    title: str
    text: str


class FixtureFetcher:
    """Serve pages from a local corpus directory: {sha256(url)[:16]}.html."""

    def __init__(self, corpus_dir: str):
        self.corpus_dir = corpus_dir

    @staticmethod
    def page_filename(url: str) -> str:
        return hashlib.sha256(url.encode("utf-8")).hexdigest()[:16] + ".html"

    def fetch(self, url: str) -> FetchedPage:
        path = os.path.join(self.corpus_dir, self.page_filename(url))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                html = fh.read()
        except OSError as exc:
            raise FetchError(f"no fixture page for {url}") from exc
        title, text = html_to_text(html)
        return FetchedPage(url=url, title=title, text=text)


class LiveFetcher:
    """Polite HTTP fetcher: robots.txt honored, per-host delay and bound."""

    def __init__(
        self,
        user_agent: str,
        delay_s: float = 0.5,
        timeout_s: float = 20.0,
        max_per_host: int = 2,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.user_agent = user_agent
        self._client = httpx.Client(
            transport=transport,
            timeout=timeout_s,
            headers={"User-Agent": user_agent},
            follow_redirects=True,
        )
        self._delay_s = delay_s
        self._gates: dict[str, RateGate] = {}
        self._sems: dict[str, threading.BoundedSemaphore] = {}
        self._robots: dict[str, Optional[urllib.robotparser.RobotFileParser]] = {}
        self._lock = threading.Lock()
        self._max_per_host = max_per_host

    def _host_state(self, host: str):
        with self._lock:
            if host not in self._gates:
                self._gates[host] = RateGate(self._delay_s)
                self._sems[host] = threading.BoundedSemaphore(self._max_per_host)
            return self._gates[host], self._sems[host]

    def _allowed(self, url: str) -> bool:
        host = urlparse(url).netloc
        with self._lock:
            parser = self._robots.get(host, "unset")
        if parser == "unset":
            parser = urllib.robotparser.RobotFileParser()
            robots_url = f"{urlparse(url).scheme}://{host}/robots.txt"
            try:
                resp = self._client.get(robots_url)
                if resp.status_code == 200:
                    parser.parse(resp.text.splitlines())
                else:
                    parser = None  # no usable robots file: assume allowed
            except httpx.HTTPError:
                parser = None
            with self._lock:
                self._robots[host] = parser
        if parser is None:
            return True
        return parser.can_fetch(self.user_agent, url)

    def fetch(self, url: str) -> FetchedPage:
        if not self._allowed(url):
            raise FetchError(f"robots.txt disallows {url}")
        host = urlparse(url).netloc
        gate, sem = self._host_state(host)
        with sem:
            gate.wait()
            try:
                resp = self._client.get(url)
            except httpx.HTTPError as exc:
                raise FetchError(f"fetch failed for {url}: {exc}") from exc
        if resp.status_code != 200:
            raise FetchError(f"HTTP {resp.status_code} for {url}")
        content_type = resp.headers.get("content-type", "")
        if "html" in content_type or resp.text.lstrip().startswith("<"):
            title, text = html_to_text(resp.text)
        else:
            title, text = "", resp.text
        return FetchedPage(url=url, title=title, text=text)

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# Scan results and dedupe


@dataclass
class ScanResult:
    source: SourceRef
    relevance: float = 0.0
    extracted_items: list[tuple[str, dict]] = field(default_factory=list)
    chunks_scanned: int = 0
    skipped: bool = False
    error: str = ""


@dataclass
class DedupeReport:
    clusters: list[list[str]]
    survivors: list[str]
    similarities: dict[str, float] = field(default_factory=dict)  # "a|b" -> score

    def duplicates(self) -> list[str]:
        out = []
        for cluster, survivor in zip(self.clusters, self.survivors):
            out.extend(i for i in cluster if i != survivor)
        return out


def dedupe(items: Sequence, threshold: float) -> DedupeReport:
    """Cluster near-duplicates by token-set Jaccard over the item text.

    Single-link clustering: any pair at or above the threshold joins their
    clusters. The survivor of each cluster is the highest-rated member,
    ties broken by earliest id.
    """
    if not 0 < threshold <= 1:
        raise ResearchError("dedupe threshold must be in (0, 1]")
    items = list(items)
    tokens = {it.id: token_set(it.text()) for it in items}
    parent = {it.id: it.id for it in items}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    similarities: dict[str, float] = {}
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            a, b = items[i], items[j]
            score = jaccard(tokens[a.id], tokens[b.id])
            if score >= threshold:
                similarities[f"{a.id}|{b.id}"] = round(score, 6)
                union(a.id, b.id)

    clusters_by_root: dict[str, list] = {}
    for it in items:
        clusters_by_root.setdefault(find(it.id), []).append(it)
    clusters: list[list[str]] = []
    survivors: list[str] = []
    for root in sorted(clusters_by_root, key=lambda r: min(m.id for m in clusters_by_root[r])):
        members = sorted(clusters_by_root[root], key=lambda m: m.id)
        best = min(members, key=lambda m: (-m.elo.rating, m.id))
        clusters.append([m.id for m in members])
        survivors.append(best.id)
    return DedupeReport(clusters=clusters, survivors=survivors, similarities=similarities)


# ---------------------------------------------------------------------------
# The research engine


_EXTRACTION = {
    # kind -> (template, payload keys that must be non-empty)
    "subproblem": ("extract_subproblems", ("title", "description")),
    "solution": ("extract_solutions", ("title", "description")),
    "evidence": ("extract_evidence", ()),
}


class ResearchEngine:
    def __init__(self, hub, store, fetcher, seed: int = 0, config: Optional[ProjectConfig] = None):
        self.hub = hub
        self.store = store
        self.fetcher = fetcher
        self.seed = seed
        self.config: ProjectConfig = config or store.config()
        self.warnings: list[str] = []

    # ------------------------------------------------------------- queries

    def generate_queries(
        self,
        subject: str,
        purpose: str,
        categories: Optional[Sequence[str]] = None,
        n_per_category: Optional[int] = None,
    ) -> list[SearchQuery]:
        """Exactly n_per_category query rows per category, persisted."""
        cfg = self.config.research
        categories = list(categories) if categories is not None else cfg.active_categories()
        n = n_per_category if n_per_category is not None else cfg.queries_per_category
        if n < 1:
            raise ResearchError("n_per_category must be at least 1")
        node = AgentNode(name="query-gen", template="query_generation", output_schema="json_array")
        new_ids: list[str] = []
        for category in categories:
            texts = run_node(
                self.hub,
                node,
                {"subject": subject, "n": str(n), "category": category, "purpose": purpose},
            )
            texts = [str(t).strip() for t in texts if str(t).strip()]
            if len(texts) < n:
                raise ResearchError(
                    f"model produced {len(texts)}/{n} queries for category {category}"
                )
            for text in texts[:n]:
                query = SearchQuery(
                    id=self.store.next_id("q"),
                    text=text,
                    category=category,
                    purpose=purpose,
                )
                self.store.add_query(query)
                new_ids.append(query.id)
        wanted = set(new_ids)
        return [q for q in self.store.queries() if q.id in wanted]

    def rank_queries(self, queries: Sequence[SearchQuery], goal: str, context_id: str) -> list[SearchQuery]:
        if len(queries) < 2:
            raise ResearchError("need at least 2 queries to rank")
        voter = model_pair_voter(
            self.hub,
            "query_pairwise",
            lambda a, b: {"goal": goal, "component_one": a.text, "component_two": b.text},
        )
        tournament_id = f"qt-{context_id}"
        self.store.open_tournament(
            {
                "id": tournament_id,
                "kind": "query",
                "item_ids": [q.id for q in queries],
                "open": True,
                "voter_kind": "model",
            }
        )
        result = run_tournament(
            list(queries),
            self.config.research.query_tournament,
            voter,
            config=self.config.elo,
            rng=derive_rng(self.seed, "query-tournament", context_id),
            tournament_id=tournament_id,
            voter_kind="model",
            recorder=lambda comparison, a, b: self.store.record_comparison(comparison, [a, b]),
        )
        self.store.close_tournament(tournament_id)
        return result.items

    def search_queries(
        self, queries: Sequence[SearchQuery], results_per_query: int
    ) -> list[SourceRef]:
        """Union of search results over queries, first-seen order, url-unique."""
        seen: dict[str, SourceRef] = {}
        for query in queries:
            try:
                results = self.hub.search(query.text, results_per_query)
            except Exception as exc:
                self._warn(f"search failed for {query.id}: {exc}")
                continue
            for ref in results:
                if ref.url not in seen:
                    ref.query_id = query.id
                    ref.retrieved_at = now_rfc3339()
                    seen[ref.url] = ref
        return list(seen.values())

    # ------------------------------------------------------------- scanning

    def scan_page(self, source: SourceRef, kind: str, tier: str, context: dict) -> ScanResult:
        """Fetch one page and extract typed items from it, chunking long pages."""
        if kind not in _EXTRACTION:
            raise ResearchError(f"unknown extraction kind: {kind}")
        try:
            page = self.fetcher.fetch(source.url)
        except FetchError as exc:
            return ScanResult(source=source, skipped=True, error=str(exc))
        if not page.text.strip():
            return ScanResult(source=source, relevance=0.0, chunks_scanned=0)
        cfg = self.config.research
        chunks = chunk_text(page.text, cfg.chunk_token_budget, cfg.chunk_overlap)
        template, required = _EXTRACTION[kind]
        goal = context["goal"]
        relevance_node = AgentNode(
            name="relevance", template="relevance", tier="fast", output_schema="int_percent"
        )
        extract_node = AgentNode(
            name=f"extract-{kind}", template=template, tier=tier, output_schema="json_array"
        )
        result = ScanResult(source=source, chunks_scanned=len(chunks))
        seen_payloads: set[str] = set()
        for chunk in chunks:
            try:
                percent = run_node(
                    self.hub,
                    relevance_node,
                    {"goal": goal, "page_title": page.title, "excerpt": chunk[:800]},
                )
            except NodeError as exc:
                self._warn(f"relevance scoring failed for {source.url}: {exc}")
                percent = 0
            result.relevance = max(result.relevance, percent / 100.0)
            slots = dict(context["slots"])
            slots["url"] = source.url
            slots["page_text"] = chunk
            try:
                rows = run_node(self.hub, extract_node, slots)
            except NodeError as exc:
                self._warn(f"extraction failed for {source.url}: {exc}")
                continue
            for row in rows:
                if not isinstance(row, dict):
                    continue
                if any(not str(row.get(k, "")).strip() for k in required):
                    continue
                key = json.dumps(row, sort_keys=True)
                if key in seen_payloads:
                    continue
                seen_payloads.add(key)
                result.extracted_items.append((kind, row))
        return result

    def scan_sources(
        self, sources: Sequence[SourceRef], kind: str, context: dict
    ) -> list[ScanResult]:
        """Fast-tier scan of every source, deep re-scan of the top fraction.

        Results come back ordered by source URL so downstream persistence is
        independent of fetch completion order.
        """
        results = self.hub.map(
            lambda src: self.scan_page(src, kind, "fast", context), list(sources)
        )
        scanned = [r for r in results if not r.skipped]
        for r in results:
            if r.skipped:
                self._warn(f"source skipped: {r.source.url}: {r.error}")
        deep_quota = math.ceil(self.config.research.deep_fraction * len(scanned))
        if deep_quota and scanned:
            ranked = sorted(scanned, key=lambda r: (-r.relevance, r.source.url))
            deep_targets = ranked[:deep_quota]
            deep_results = self.hub.map(
                lambda r: self.scan_page(r.source, kind, "deep", context), deep_targets
            )
            by_url = {r.source.url: r for r in results}
            for deep in deep_results:
                if not deep.skipped:
                    by_url[deep.source.url] = deep
            results = list(by_url.values())
        return sorted(results, key=lambda r: r.source.url)

    # ------------------------------------------------------------- stages

    def run_research_stage(self, stage: str, subproblem_id: Optional[str] = None):
        if stage == "problems":
            return self.problems_stage()
        if stage == "solutions":
            if subproblem_id is None:
                raise ResearchError("solutions stage needs a subproblem_id")
            return self.solutions_stage(self.store.get_subproblem(subproblem_id))
        raise ResearchError(f"unknown research stage: {stage}")

    def problems_stage(self) -> list[SubProblem]:
        """Decompose the problem statement into ranked sub-problems."""
        statement = self.store.statement
        cfg = self.config
        queries = self.generate_queries(
            statement.text, "the main sub problems, root causes and affected groups"
        )
        ranked = self.rank_queries(queries, statement.text, "problems")
        top = ranked[: cfg.research.top_queries_to_search]
        sources = self.search_queries(top, cfg.research.results_per_query)
        if not sources:
            raise StageError("problems stage found no sources to scan")
        scans = self.scan_sources(
            sources,
            "subproblem",
            {"goal": statement.text, "slots": {"statement": statement.text}},
        )
        persisted: list[SubProblem] = []
        for scan in scans:
            if scan.skipped or not scan.extracted_items:
                continue
            self.store.add_source(scan.source)
            for _, payload in scan.extracted_items:
                entities = [
                    AffectedEntity(
                        name=str(e.get("name", "")).strip(),
                        negative_effects=[str(x) for x in e.get("negativeEffects", [])],
                    )
                    for e in payload.get("affectedEntities", [])
                    if str(e.get("name", "")).strip()
                ]
                persisted.append(
                    self.store.new_subproblem(
                        title=str(payload["title"]).strip(),
                        description=str(payload["description"]).strip(),
                        affected_entities=entities,
                        sources=[scan.source],
                    )
                )
        if not persisted:
            raise StageError("problems stage: no items extracted")
        report = dedupe(persisted, cfg.research.dedupe_threshold)
        for dup in report.duplicates():
            self.store.set_subproblem_active(dup, False)
        survivors = [self.store.get_subproblem(i) for i in report.survivors]
        if len(survivors) >= 2:
            self._subproblem_tournament(survivors)
        ranked_sps = sorted_by_rating([self.store.get_subproblem(s.id) for s in survivors])
        for overflow in ranked_sps[cfg.subproblem_count :]:
            self.store.set_subproblem_active(overflow.id, False)
            self._warn(f"deactivated over-quota sub-problem {overflow.id}")
        return [sp for sp in ranked_sps if sp.active]

    def _subproblem_tournament(self, subproblems: Sequence[SubProblem]) -> None:
        statement = self.store.statement
        instruction = statement.ranking_guidance or prompts.DEFAULT_INTEREST_INSTRUCTION
        voter = model_pair_voter(
            self.hub,
            "pairwise_subproblem",
            lambda a, b: {
                "interest_instruction": instruction,
                "problem": statement.text,
                "component_one": a.text(),
                "component_two": b.text(),
            },
        )
        tournament_id = "spt-problems"
        self.store.open_tournament(
            {
                "id": tournament_id,
                "kind": "subproblem",
                "item_ids": [sp.id for sp in subproblems],
                "open": True,
                "voter_kind": "model",
            }
        )
        run_tournament(
            list(subproblems),
            self.config.evolution.tournament,
            voter,
            config=self.config.elo,
            rng=derive_rng(self.seed, "subproblem-tournament"),
            tournament_id=tournament_id,
            voter_kind="model",
            recorder=lambda c, a, b: self.store.record_comparison(c, [a, b]),
        )
        self.store.close_tournament(tournament_id)

    def solutions_stage(self, subproblem: SubProblem):
        """Web-source candidate solutions for one sub-problem."""
        cfg = self.config
        problem_text = subproblem.text()
        queries = self.generate_queries(
            problem_text, "practical solutions and interventions"
        )
        ranked = self.rank_queries(queries, problem_text, f"solutions-{subproblem.id}")
        top = ranked[: cfg.research.top_queries_to_search]
        sources = self.search_queries(top, cfg.research.results_per_query)
        if not sources:
            raise StageError(f"no sources found for {subproblem.id}")
        scans = self.scan_sources(
            sources,
            "solution",
            {"goal": problem_text, "slots": {"problem": problem_text}},
        )
        persisted = []
        for scan in scans:
            if scan.skipped or not scan.extracted_items:
                continue
            self.store.add_source(scan.source)
            for _, payload in scan.extracted_items:
                persisted.append(
                    self.store.new_solution(
                        subproblem_id=subproblem.id,
                        title=str(payload["title"]).strip(),
                        description=str(payload["description"]).strip(),
                        main_benefit=str(payload.get("mainBenefitOfSolution", "")).strip(),
                        main_obstacle=str(
                            payload.get("mainObstacleToSolutionAdoption", "")
                        ).strip(),
                        origin=ORIGIN_WEB,
                        generation_index=0,
                        sources=[scan.source],
                    )
                )
        if not persisted:
            raise StageError(f"solutions stage: no items extracted for {subproblem.id}")
        if cfg.evolution.prune_nonviable:
            self._mark_nonviable(subproblem, persisted)
        # Dedupe across every viable solution of the sub-problem, not only
        # this run's extractions, so re-running the stage stays idempotent.
        candidates = [
            s for s in self.store.solutions(subproblem_id=subproblem.id) if s.viable
        ]
        if candidates:
            report = dedupe(candidates, cfg.research.dedupe_threshold)
            for dup_id in report.duplicates():
                dup = self.store.get_solution(dup_id)
                dup.viable = False
                self.store.update_solution(dup)
            candidates = [self.store.get_solution(i) for i in report.survivors]
        if len(candidates) >= 2:
            self._solution_tournament(subproblem, candidates, "research")
        return sorted_by_rating([self.store.get_solution(c.id) for c in candidates])

    def _mark_nonviable(self, subproblem: SubProblem, solutions) -> None:
        node = AgentNode(name="viability", template="viability", output_schema="yes_no")
        verdicts = self.hub.map(
            lambda sol: run_node(
                self.hub, node, {"problem": subproblem.text(), "solution": sol.text()}
            ),
            list(solutions),
        )
        for sol, verdict in zip(solutions, verdicts):
            if verdict == "No":
                fresh = self.store.get_solution(sol.id)
                fresh.viable = False
                self.store.update_solution(fresh)

    def _solution_tournament(self, subproblem: SubProblem, solutions, label: str) -> None:
        instruction = (
            self.store.statement.ranking_guidance or prompts.DEFAULT_INTEREST_INSTRUCTION
        )
        voter = model_pair_voter(
            self.hub,
            "pairwise_solution",
            lambda a, b: {
                "interest_instruction": instruction,
                "problem": subproblem.text(),
                "component_one": a.text(),
                "pro_one": prompts.top_pro(a),
                "con_one": prompts.top_con(a),
                "component_two": b.text(),
                "pro_two": prompts.top_pro(b),
                "con_two": prompts.top_con(b),
            },
        )
        tournament_id = f"st-{subproblem.id}-{label}"
        self.store.open_tournament(
            {
                "id": tournament_id,
                "kind": "solution",
                "item_ids": [s.id for s in solutions],
                "open": True,
                "voter_kind": "model",
            }
        )
        run_tournament(
            list(solutions),
            self.config.evolution.tournament,
            voter,
            config=self.config.elo,
            rng=derive_rng(self.seed, "solution-tournament", subproblem.id, label),
            tournament_id=tournament_id,
            voter_kind="model",
            recorder=lambda c, a, b: self.store.record_comparison(c, [a, b]),
        )
        self.store.close_tournament(tournament_id)

    # ------------------------------------------------------------- evidence

    def gather_evidence_for(self, policy, categories: Sequence[str]) -> list[EvidenceItem]:
        """Collect categorized evidence items for one policy.

        Reuses the generic query/search/scan machinery with the category
        slotted into the query-generation and extraction prompts; a category
        with zero findings simply contributes no items.
        """
        if not categories:
            raise ResearchError("categories must be non-empty")
        cfg = self.config.policy
        items: list[EvidenceItem] = []
        for category in categories:
            queries = self.generate_queries(
                policy.text(),
                f"evidence in the category: {category}",
                categories=[category],
                n_per_category=cfg.evidence_queries_per_category,
            )
            sources = self.search_queries(queries, cfg.evidence_results_per_query)
            scans = self.scan_sources(
                sources,
                "evidence",
                {
                    "goal": f"{policy.title} {category}",
                    "slots": {"policy": policy.text(), "category": category},
                },
            )
            for scan in scans:
                if scan.skipped or not scan.extracted_items:
                    continue
                self.store.add_source(scan.source)
                for _, payload in scan.extracted_items:
                    summary = str(payload.get("summary", "")).strip()
                    bullets = [str(b).strip() for b in payload.get("bullets", []) if str(b).strip()]
                    if not summary and not bullets:
                        continue
                    items.append(
                        EvidenceItem(
                            category=category,
                            summary=summary,
                            bullets=bullets,
                            source=scan.source,
                        )
                    )
        return items

    # ------------------------------------------------------------- misc

    def _warn(self, message: str) -> None:
        log.warning("%s", message)
        self.warnings.append(message)
