"""Question answering: time-window extraction, filtered retrieval, task execution, synthesis."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .engine import DnCEngine, EngineConfig, Rescuer, RetrievalContext, Trace
from .errors import EngineError, InvalidInput, ProviderError
from .prompts import time_request
from .store import DEFAULT_K, TimeFilter
from .tasktree import TaskNode, TaskStatus, init_tree
from .text import extract_json
from .timecode import TIMESTAMP_RE, parse_timestamp_lenient
from .tools import ToolRegistry

log = logging.getLogger(__name__)

DEFAULT_PAD = 5.0

_NATURAL_RE = re.compile(
    r"\b(?:(?P<h>\d+)\s*hours?\b[\s,]*(?:and\s+)?)?"
    r"(?:(?P<m>\d+)\s*minutes?\b[\s,]*(?:and\s+)?)?"
    r"(?:(?P<s>\d+(?:\.\d+)?)\s*seconds?\b)?",
    re.IGNORECASE,
)
_JOIN_RE = re.compile(r"^\s*(?:and|to|until|through|-|–)\s*$", re.IGNORECASE)
_RANGE_LEAD_RE = re.compile(r"\b(?:between|from)\s*$", re.IGNORECASE)


def _mentions(text: str) -> list[tuple[int, int, float]]:
    """(start, end, seconds) for every time expression, in order."""
    found = []
    for m in TIMESTAMP_RE.finditer(text):
        try:
            found.append((m.start(), m.end(), parse_timestamp_lenient(m.group(1))))
        except InvalidInput:
            continue
    for m in _NATURAL_RE.finditer(text):
        if not any(m.group(g) for g in "hms"):
            continue
        if any(not (m.end() <= a or m.start() >= b) for a, b, _ in found):
            continue
        h, mi, s = (float(m.group(g) or 0) for g in "hms")
        found.append((m.start(), m.end(), h * 3600 + mi * 60 + s))
    return sorted(found)


def pattern_window(text: str) -> tuple[float, float, bool] | None:
    """(lo, hi, is_range) from time expressions in ``text``, or None."""
    found = _mentions(text)
    if not found:
        return None
    for (s1, e1, a), (s2, _, b) in zip(found, found[1:]):
        if _JOIN_RE.match(text[e1:s2]) and (_RANGE_LEAD_RE.search(text[:s1]) or text[e1:s2].strip() in "-–"):
            return min(a, b), max(a, b), True
    times = [t for _, _, t in found]
    return min(times), max(times), False


def extract_time_filter(query_text: str, llm=None, pad: float = DEFAULT_PAD, video_id: str | None = None) -> TimeFilter | None:
    """Time window a question refers to, padded by ``pad`` seconds on each side.

    Pattern matching runs first; ``llm`` is consulted only when it finds
    nothing, and any contract problem there means "no window".
    """
    if not query_text or not query_text.strip():
        raise InvalidInput("query text must be non-empty")
    found = pattern_window(query_text)
    if found is None and llm is not None:
        found = _llm_window(query_text, llm)
    if found is None:
        return None
    lo, hi, _ = found
    return TimeFilter((max(0.0, lo - pad), hi + pad), video_id)


def _llm_window(query_text: str, llm):
    try:
        obj = extract_json(llm.chat(time_request(query_text)))
    except ProviderError as exc:
        log.debug("time extraction call failed: %s", exc)
        return None
    if not obj or obj.get("none"):
        return None
    try:
        lo, hi = float(obj["t_lo"]), float(obj["t_hi"])
    except (KeyError, TypeError, ValueError):
        return None
    if lo < 0 or hi < lo:
        return None
    return lo, hi, lo != hi


@dataclass
class Query:
    text: str
    video_id: str | None = None
    extracted_filter: TimeFilter | None = None
    options: dict[str, str] | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise InvalidInput("query text must be non-empty")


@dataclass(frozen=True)
class QueryConfig:
    k: int = DEFAULT_K
    pad: float = DEFAULT_PAD
    engine: EngineConfig = EngineConfig()
    llm_time_filter: bool = True


@dataclass
class FinalAnswer:
    text: str
    answered: bool
    trace: Trace
    tree: TaskNode
    hits: list = field(default_factory=list)

    def trace_json(self) -> str:
        return self.trace.dumps(self.tree)


def retrieve(store, embedder, query: Query, k: int, trace: Trace, llm=None, pad: float = DEFAULT_PAD):
    """Filtered hybrid retrieval, widening to the whole video when the window is empty."""
    flt = query.extracted_filter
    if flt is None:
        flt = extract_time_filter(query.text, llm, pad) or TimeFilter()
    flt = TimeFilter(flt.window, query.video_id)
    hits = store.hybrid_search(query.text, embedder, flt, k)[:k]
    if not hits and flt.window is not None:
        trace.add("retrieval_fallback", notice=f"no segments overlap {list(flt.window)}; searched the whole video")
        flt = TimeFilter(None, query.video_id)
        hits = store.hybrid_search(query.text, embedder, flt, k)[:k]
    trace.add(
        "retrieved",
        window=list(flt.window) if flt.window else None,
        hits=[h.entry.entry_id for h in hits],
    )
    return hits


class QueryEngine:
    def __init__(
        self,
        store,
        providers,
        tools: ToolRegistry | None = None,
        config: QueryConfig = QueryConfig(),
        rescuer: Rescuer | None = None,
    ):
        self.store = store
        self.providers = providers
        self.tools = tools or ToolRegistry()
        self.config = config
        self.rescuer = rescuer

    def answer(self, query: Query) -> FinalAnswer:
        trace = Trace()
        llm = self.providers.chat if self.config.llm_time_filter else None
        hits = retrieve(self.store, self.providers.embedder, query, self.config.k, trace, llm, self.config.pad)
        context = RetrievalContext(tuple(hits), tuple(self.tools.catalog()), query.text, (), query.video_id, query.options)
        engine = DnCEngine(self.providers.chat, self.tools, self.config.engine, self.rescuer, trace)
        root = init_tree(query.text)
        engine.dnc(root, context)
        if root.status is TaskStatus.FAILED and not root.children:
            # Nothing to summarise: the failure reason is the answer.
            trace.add("synthesized", root, leaves=[root.id], passthrough=True)
            return FinalAnswer(root.failure_reason or "unanswered", False, trace, root, hits)
        try:
            text = engine.conclusive_synthesis(root, query.text, query.options)
        except EngineError as exc:
            trace.add("synthesized", root, error=str(exc))
            return FinalAnswer(str(exc), False, trace, root, hits)
        return FinalAnswer(text, root.status is TaskStatus.SUCCESS, trace, root, hits)
