"""Caption knowledge store: exact vector search plus keyword search, time-filtered.

On disk a store is a directory holding ``entries.log`` (one JSON record per
upsert, last write wins) and ``meta`` (dimension and live entry count).
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInput, VQAgentError
from .text import STOPWORDS, tokenize

log = logging.getLogger(__name__)

DEFAULT_K = 10


@dataclass(frozen=True)
class KnowledgeEntry:
    entry_id: str
    video_id: str
    start_ts: float
    end_ts: float
    caption_text: str
    embedding: np.ndarray

    def __post_init__(self):
        if not self.start_ts < self.end_ts:
            raise InvalidInput(f"entry {self.entry_id}: start {self.start_ts} must precede end {self.end_ts}")
        norm = float(np.linalg.norm(self.embedding))
        if abs(norm - 1.0) > 1e-6:
            raise InvalidInput(f"entry {self.entry_id}: embedding norm {norm} is not 1")

    @property
    def span_key(self) -> tuple[str, float, float]:
        return (self.video_id, self.start_ts, self.end_ts)

    def to_record(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "video_id": self.video_id,
            "start_ts": self.start_ts,
            "end_ts": self.end_ts,
            "caption_text": self.caption_text,
            "embedding": [float(v) for v in self.embedding],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "KnowledgeEntry":
        return cls(
            rec["entry_id"],
            rec["video_id"],
            float(rec["start_ts"]),
            float(rec["end_ts"]),
            rec["caption_text"],
            np.asarray(rec["embedding"], dtype=float),
        )


def make_entry_id(video_id: str, start_ts: float, end_ts: float) -> str:
    return f"{video_id}:{start_ts:.3f}-{end_ts:.3f}"


@dataclass(frozen=True)
class TimeFilter:
    window: tuple[float, float] | None = None
    video_id: str | None = None

    def __post_init__(self):
        if self.window is not None and self.window[0] > self.window[1]:
            raise InvalidInput(f"time window {self.window} is inverted")

    def admits(self, entry: KnowledgeEntry) -> bool:
        if self.video_id is not None and entry.video_id != self.video_id:
            return False
        if self.window is None:
            return True
        lo, hi = self.window
        if lo == hi:
            return entry.start_ts <= lo <= entry.end_ts
        return min(entry.end_ts, hi) - max(entry.start_ts, lo) > 0


NO_FILTER = TimeFilter()


@dataclass(frozen=True)
class RetrievalHit:
    entry: KnowledgeEntry
    score: float
    source: str  # "vector" | "keyword" | "both"


def _ranked(scored: list[tuple[float, KnowledgeEntry]], k: int, source: str) -> list[RetrievalHit]:
    scored.sort(key=lambda pair: (-pair[0], pair[1].entry_id))
    return [RetrievalHit(e, float(s), source) for s, e in scored[:k]]


class KnowledgeStore:
    def __init__(self, dimension: int, path: str | os.PathLike | None = None):
        if dimension < 1:
            raise InvalidInput("dimension must be positive")
        self.dimension = dimension
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, KnowledgeEntry] = {}
        self._by_span: dict[tuple, str] = {}
        self._matrix: np.ndarray | None = None
        self._order: list[KnowledgeEntry] = []
        self._lock = threading.RLock()
        if self.path is not None:
            self.path.mkdir(parents=True, exist_ok=True)
            self._write_meta()

    # ------------------------------------------------------------ storage

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, entry_id: str) -> KnowledgeEntry:
        try:
            return self._entries[entry_id]
        except KeyError:
            raise InvalidInput(f"no entry {entry_id!r}") from None

    def entries(self, video_id: str | None = None) -> list[KnowledgeEntry]:
        with self._lock:
            out = [e for e in self._entries.values() if video_id is None or e.video_id == video_id]
        return sorted(out, key=lambda e: (e.video_id, e.start_ts, e.entry_id))

    def upsert(self, entry: KnowledgeEntry, _log: bool = True) -> "KnowledgeStore":
        if entry.embedding.shape != (self.dimension,):
            raise InvalidInput(f"embedding has shape {entry.embedding.shape}, store expects ({self.dimension},)")
        with self._lock:
            old = self._by_span.get(entry.span_key)
            if old is not None and old != entry.entry_id:
                del self._entries[old]
            self._entries[entry.entry_id] = entry
            self._by_span[entry.span_key] = entry.entry_id
            self._matrix = None
            if _log and self.path is not None:
                with open(self.path / "entries.log", "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry.to_record(), sort_keys=True) + "\n")
                self._write_meta()
        return self

    def _write_meta(self):
        meta = {"dimension": self.dimension, "count": len(self._entries)}
        tmp = self.path / "meta.tmp"
        tmp.write_text(json.dumps(meta, sort_keys=True))
        os.replace(tmp, self.path / "meta")

    def compact(self):
        """Rewrite the log with one record per live entry."""
        if self.path is None:
            return
        with self._lock:
            tmp = self.path / "entries.log.tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                for e in self.entries():
                    fh.write(json.dumps(e.to_record(), sort_keys=True) + "\n")
            os.replace(tmp, self.path / "entries.log")
            self._write_meta()

    @classmethod
    def open(cls, path: str | os.PathLike, dimension: int | None = None) -> "KnowledgeStore":
        path = Path(path)
        meta_file = path / "meta"
        if meta_file.exists():
            meta = json.loads(meta_file.read_text())
            if dimension is not None and dimension != meta["dimension"]:
                raise InvalidInput(f"store at {path} has dimension {meta['dimension']}, not {dimension}")
            dimension = meta["dimension"]
        elif dimension is None:
            raise InvalidInput(f"{path} is not a knowledge store and no dimension was given")
        store = cls(dimension, path)
        log_file = path / "entries.log"
        if log_file.exists():
            with open(log_file, encoding="utf-8") as fh:
                for n, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        store.upsert(KnowledgeEntry.from_record(json.loads(line)), _log=False)
                    except (ValueError, KeyError) as exc:
                        raise VQAgentError(f"{log_file}:{n}: corrupt record ({exc})") from None
            store._write_meta()
        return store

    # ------------------------------------------------------------ search

    def _snapshot(self) -> tuple[list[KnowledgeEntry], np.ndarray]:
        with self._lock:
            if self._matrix is None:
                self._order = list(self._entries.values())
                self._matrix = (
                    np.stack([e.embedding for e in self._order]) if self._order else np.zeros((0, self.dimension))
                )
            return self._order, self._matrix

    def vector_search(self, query_vec, filter: TimeFilter = NO_FILTER, k: int = DEFAULT_K) -> list[RetrievalHit]:
        """Exhaustive cosine top-k among entries admitted by ``filter``; ties break on entry id."""
        if k < 1:
            raise InvalidInput("k must be at least 1")
        q = np.asarray(query_vec, dtype=float)
        if q.shape != (self.dimension,):
            raise InvalidInput(f"query has shape {q.shape}, store expects ({self.dimension},)")
        norm = np.linalg.norm(q)
        if norm == 0 or not math.isfinite(norm):
            raise InvalidInput("query vector must be non-zero and finite")
        order, matrix = self._snapshot()
        if not order:
            return []
        scores = matrix @ (q / norm)
        scored = [(float(s), e) for s, e in zip(scores, order) if filter.admits(e)]
        return _ranked(scored, k, "vector")

    def keyword_search(self, terms: list[str], filter: TimeFilter = NO_FILTER, k: int = DEFAULT_K) -> list[RetrievalHit]:
        """Rank by total occurrences of the (case-folded) terms among caption tokens."""
        if not terms:
            raise InvalidInput("keyword search needs at least one term")
        if k < 1:
            raise InvalidInput("k must be at least 1")
        wanted = {t for term in terms for t in tokenize(term)}
        order, _ = self._snapshot()
        scored = []
        for e in order:
            if not filter.admits(e):
                continue
            counts = Counter(tokenize(e.caption_text))
            score = sum(counts[t] for t in wanted)
            if score > 0:
                scored.append((float(score), e))
        return _ranked(scored, k, "keyword")

    def hybrid_search(self, query_text: str, embedder, filter: TimeFilter = NO_FILTER, k: int = DEFAULT_K) -> list[RetrievalHit]:
        """Union of vector and keyword top-k, re-ranked by the sum of min-max normalised scores."""
        terms = [t for t in tokenize(query_text) if t not in STOPWORDS]
        keyword = self.keyword_search(terms, filter, k) if terms else []
        try:
            vector = self.vector_search(embedder.embed(query_text), filter, k)
        except VQAgentError as exc:
            log.warning("embedding failed, falling back to keyword search only: %s", exc)
            vector = []
        return fuse(vector, keyword)


def _normalise(hits: list[RetrievalHit]) -> dict[str, float]:
    if not hits:
        return {}
    scores = [h.score for h in hits]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return {h.entry.entry_id: 1.0 for h in hits}
    return {h.entry.entry_id: (h.score - lo) / (hi - lo) for h in hits}


def fuse(vector: list[RetrievalHit], keyword: list[RetrievalHit]) -> list[RetrievalHit]:
    nv, nk = _normalise(vector), _normalise(keyword)
    entries = {h.entry.entry_id: h.entry for h in vector + keyword}
    fused = []
    for eid, entry in entries.items():
        source = "both" if eid in nv and eid in nk else ("vector" if eid in nv else "keyword")
        fused.append(RetrievalHit(entry, nv.get(eid, 0.0) + nk.get(eid, 0.0), source))
    fused.sort(key=lambda h: (-h.score, h.entry.entry_id))
    return fused
