"""Small shared helpers: deterministic hashing, token math, timestamps, parallel map."""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import random
import re
import threading
from typing import Any, Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
U = TypeVar("U")

RFC3339_RE = re.compile(
    r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:Z|[+-]\d{2}:\d{2})"
)

# Replacement token used when comparing two runs of the same pipeline. Wall
# clock time is the one thing we allow to differ between runs.
TS_TOKEN = "<TS>"


def now_rfc3339() -> str:
    """Current UTC time, second resolution, RFC 3339 with trailing Z."""
    import datetime

    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def normalize_timestamps(text: str) -> str:
    """Replace every RFC 3339 timestamp in text with a fixed token."""
    return RFC3339_RE.sub(TS_TOKEN, text)


def stable_hash(*parts: Any) -> int:
    """64-bit integer hash of the given parts, stable across processes.

    Everything that needs run-to-run determinism (mock outputs, derived seeds,
    tie breaking) goes through here instead of builtin hash(), which is
    salted per process.
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            data = part
        elif isinstance(part, str):
            data = part.encode("utf-8")
        else:
            data = repr(part).encode("utf-8")
        h.update(len(data).to_bytes(8, "big"))
        h.update(data)
    return int.from_bytes(h.digest()[:8], "big")


def unit_float(*parts: Any) -> float:
    """Deterministic float in [0, 1) derived from the given parts."""
    return stable_hash(*parts) / 2.0**64


def derive_rng(seed: int, *context: Any) -> random.Random:
    """Independent RNG stream named by context.

    Consumers never share a sequential stream; each call site derives its own
    generator from (seed, context), so inserting a new consumer or resuming a
    run half way cannot shift anybody else's draws.
    """
    return random.Random(stable_hash("rng", seed, *context))


_WORD_RE = re.compile(r"[a-z0-9']+")

# Function words ignored when comparing item texts for near-duplicates.
STOPWORDS = frozenset(
    """a an and are as at be by for from has have in into is it its of on or
    that the their this to was were will with""".split()
)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens, punctuation stripped."""
    return _WORD_RE.findall(text.lower())


def token_set(text: str) -> frozenset[str]:
    return frozenset(tokenize(text))


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    """Jaccard similarity of two token sets. Two empty sets count as identical."""
    if not a and not b:
        return 1.0
    union = len(a | b)
    if union == 0:
        return 1.0
    return len(a & b) / union


def salient_tokens(text: str, limit: int = 8) -> list[str]:
    """Most useful content words of a text, original order, stopwords dropped."""
    seen: list[str] = []
    for tok in tokenize(text):
        if tok in STOPWORDS or len(tok) < 3:
            continue
        if tok not in seen:
            seen.append(tok)
    return seen[:limit]


def bounded_map(
    fn: Callable[[T], U],
    items: Sequence[T],
    max_workers: int,
) -> list[U]:
    """Parallel map preserving input order with at most max_workers in flight.

    Results come back in input order regardless of completion order, so
    callers stay deterministic. Exceptions propagate from the first failing
    item in input order.
    """
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


class RateGate:
    """Serializes access with a minimum delay between consecutive passes.

    Used for polite fetching: one gate per host keeps request spacing without
    blocking other hosts.
    """

    def __init__(self, min_interval_s: float, clock=None, sleep=None):
        import time

        self.min_interval_s = min_interval_s
        self._clock = clock or time.monotonic
        self._sleep = sleep or time.sleep
        self._lock = threading.Lock()
        self._last = float("-inf")

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            gap = self._last + self.min_interval_s - now
            if gap > 0:
                self._sleep(gap)
            self._last = self._clock()


def atomic_write(path: str, data: str) -> None:
    """Write a file via rename so readers never observe a half written file."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def dump_json(obj: Any) -> str:
    """Canonical JSON used for documents: sorted keys, 2-space indent."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dump_json_line(obj: Any) -> str:
    """Canonical single-line JSON used for log records."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def parse_json_block(text: str) -> Any:
    """Parse JSON out of model output that may wrap it in prose or fences.

    Tries the whole string first, then fenced blocks, then the outermost
    brace or bracket span. Raises ValueError when nothing parses.
    """
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    fence = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    if fence:
        try:
            return json.loads(fence.group(1).strip())
        except json.JSONDecodeError:
            pass
    for opener, closer in (("[", "]"), ("{", "}")):
        start = text.find(opener)
        end = text.rfind(closer)
        if start != -1 and end > start:
            try:
                return json.loads(text[start : end + 1])
            except json.JSONDecodeError:
                continue
    raise ValueError(f"no JSON found in model output: {text[:200]!r}")


def chunk_words(words: Sequence[str], budget: int, overlap: int) -> list[list[str]]:
    """Split a word sequence into budget-sized chunks with fixed overlap.

    Consecutive chunks share `overlap` words so facts straddling a boundary
    appear whole in at least one chunk.
    """
    if budget <= 0:
        raise ValueError("chunk budget must be positive")
    if overlap < 0 or overlap >= budget:
        raise ValueError("overlap must be in [0, budget)")
    if len(words) <= budget:
        return [list(words)]
    chunks = []
    step = budget - overlap
    start = 0
    while start < len(words):
        chunk = list(words[start : start + budget])
        chunks.append(chunk)
        if start + budget >= len(words):
            break
        start += step
    return chunks


def format_thousands(n: int) -> str:
    """1234567 -> '1.234.567'. Display style for ratings in reports."""
    return f"{n:,}".replace(",", ".")
