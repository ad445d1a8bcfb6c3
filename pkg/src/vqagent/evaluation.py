"""Benchmark harness: datasets, scoring rules, answerers and reports.

Scoring legend (also written into every report):

* point truth, point prediction: correct when ``|pred - truth| <= 2 s``.
* point truth, span prediction: the span's midpoint is scored as a point.
* span truth, span prediction: correct when IoU > 0.9.
* span truth, point prediction: correct when the point lies inside the
  truth span and that span is at most 4 s long.
* several valid truths: correct when any one matches. Only the first time
  expression of a prediction is scored.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from .errors import InvalidInput, VQAgentError
from .prompts import answer_request
from .query import Query, QueryEngine, extract_time_filter, retrieve
from .engine import Trace
from .timecode import TimeItem, parse_time_items, to_seconds
from .video import VIDEO_TYPES, VideoLibrary, nearest_frame

log = logging.getLogger(__name__)

CATEGORIES = ("reasoning", "information_summary", "event_localization", "external_knowledge")
CHOICE_CATEGORIES = ("reasoning", "information_summary", "external_knowledge")
POINT_TOLERANCE = 2.0
IOU_THRESHOLD = 0.9
POINT_IN_SPAN_MAX = 4.0
LEGEND = __doc__.split("Scoring legend (also written into every report):")[1].strip()


# ------------------------------------------------------------------ dataset

@dataclass
class EvalQuestion:
    qid: str
    video_id: str
    category: str
    question: str
    ground_truth: object
    options: dict[str, str] | None = None
    video_type: str | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise InvalidInput(f"{self.qid}: unknown category {self.category!r}")
        if self.category in CHOICE_CATEGORIES and not self.options:
            raise InvalidInput(f"{self.qid}: multiple-choice question without options")
        if self.category == "event_localization" and not parse_truth(self.ground_truth):
            raise InvalidInput(f"{self.qid}: localization truth must hold timestamps or spans")
        if self.video_type is not None and self.video_type not in VIDEO_TYPES:
            raise InvalidInput(f"{self.qid}: unknown video type {self.video_type!r}")


def load_dataset(path) -> list[EvalQuestion]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    EvalQuestion(
                        qid=str(rec["qid"]),
                        video_id=rec["video_id"],
                        category=rec["category"],
                        question=rec["question"],
                        ground_truth=rec["ground_truth"],
                        options=rec.get("options"),
                        video_type=rec.get("video_type"),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise InvalidInput(f"{path}:{n}: bad question record ({exc})") from None
    return out


# ------------------------------------------------------------------ scoring

def iou(a, b) -> float:
    (alo, ahi), (blo, bhi) = a, b
    if alo > ahi or blo > bhi:
        raise InvalidInput(f"inverted span in iou({a}, {b})")
    if alo == ahi and blo == bhi:
        return 1.0 if alo == blo else 0.0
    inter = max(0.0, min(ahi, bhi) - max(alo, blo))
    union = max(ahi, bhi) - min(alo, blo)
    return inter / union if union > 0 else 0.0


def _item(value) -> list[TimeItem]:
    if isinstance(value, TimeItem):
        return [value]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        t = float(value)
        return [TimeItem(t, t, False)]
    if isinstance(value, str):
        return parse_time_items(value)
    if isinstance(value, tuple) and len(value) == 2:
        return [TimeItem(to_seconds(value[0]), to_seconds(value[1]), True)]
    if isinstance(value, list):
        # a list always means "any of these"; write spans as "[a, b]" strings or (lo, hi) tuples
        return [it for v in value for it in _item(v)]
    return []


def parse_truth(truth) -> list[TimeItem]:
    try:
        return _item(truth)
    except InvalidInput:
        return []


def judge_localization(predicted, truth) -> tuple[bool, str, str]:
    """(correct, rule, note). Never raises on a bad prediction."""
    try:
        items = _item(predicted)
    except InvalidInput:
        items = []
    if not items:
        return False, "unparseable", f"no time expression in prediction {str(predicted)[:60]!r}"
    pred = items[0]
    if pred.lo > pred.hi:
        return False, "unparseable", "inverted predicted span"
    truths = parse_truth(truth)
    if not truths:
        raise InvalidInput(f"ground truth {truth!r} holds no time expression")
    rule = ""
    for t in truths:
        if not t.is_span:
            rule = "span-midpoint" if pred.is_span else "point-tolerance"
            p = pred.midpoint if pred.is_span else pred.lo
            if abs(p - t.lo) <= POINT_TOLERANCE + 1e-9:
                return True, rule, ""
        elif pred.is_span:
            rule = "span-iou"
            if iou((pred.lo, pred.hi), (t.lo, t.hi)) > IOU_THRESHOLD:
                return True, rule, ""
        else:
            rule = "point-in-span"
            if t.lo <= pred.lo <= t.hi and t.hi - t.lo <= POINT_IN_SPAN_MAX:
                return True, rule, ""
    return False, rule, ""


def score_localization(predicted, truth) -> bool:
    return judge_localization(predicted, truth)[0]


_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")
_RUN_SEPARATORS = {",", "and", "&", "/", ";", "(", ")", "or"}


def extract_labels(predicted: str, labels) -> set[str]:
    labels = {str(x).casefold() for x in labels}
    tokens = _TOKEN_RE.findall(predicted.casefold())
    for i, tok in enumerate(tokens):
        if tok == "none" and (i + 1 == len(tokens) or tokens[i + 1] in ("of", ".", ",")):
            return set()
        if tok in labels:
            picked = {tok}
            for nxt in tokens[i + 1:]:
                if nxt in labels:
                    picked.add(nxt)
                elif nxt not in _RUN_SEPARATORS:
                    break
            return picked
    return set()


def judge_choice(predicted: str, truth, labels=None) -> tuple[bool, str]:
    truth_set = {t.strip().casefold() for t in (truth.split(",") if isinstance(truth, str) else truth)}
    picked = extract_labels(predicted or "", labels or truth_set | set("abcde"))
    if not picked:
        return False, "no option label in prediction"
    return picked == truth_set, ""


def score_choice(predicted: str, truth, labels=None) -> bool:
    return judge_choice(predicted, truth, labels)[0]


# ------------------------------------------------------------------ answerers

@dataclass
class Prediction:
    text: str
    trace: Trace | None = None


Answerer = Callable[[EvalQuestion], Prediction]


class AgentAnswerer:
    """Full pipeline: filtered retrieval, task decomposition, tools, synthesis."""

    mode = "omagent"

    def __init__(self, engine: QueryEngine):
        self.engine = engine

    def __call__(self, q: EvalQuestion) -> Prediction:
        llm = self.engine.providers.chat if self.engine.config.llm_time_filter else None
        flt = extract_time_filter(q.question, llm, self.engine.config.pad)
        ans = self.engine.answer(Query(q.question, q.video_id, flt, q.options))
        return Prediction(ans.text, ans.trace)


def uniform_frames(frames, duration: float, n: int = 20):
    """``n`` frames nearest an interior uniform grid over the whole video, deduplicated."""
    if len(frames) <= n:
        return list(frames)
    picked = []
    for i in range(n):
        f = nearest_frame(frames, (i + 0.5) * duration / n)
        if not picked or picked[-1] is not f:
            picked.append(f)
    return picked


class FramesSttAnswerer:
    """Control: evenly spaced frames plus the full transcript in one chat call."""

    mode = "frames_stt"

    def __init__(self, library: VideoLibrary, chat, n_frames: int = 20, detector=None):
        self.library = library
        self.chat = chat
        self.n_frames = n_frames
        self.detector = detector

    def __call__(self, q: EvalQuestion) -> Prediction:
        from .ingest import annotate_frames

        source = self.library.get(q.video_id)
        frames = annotate_frames(uniform_frames(source.frames, source.duration, self.n_frames), self.detector)
        trace = Trace()
        trace.add("answered", frames=[f.ref for f in frames])
        text = self.chat.chat(answer_request(q.question, None, frames, source.transcript, q.options))
        return Prediction(text, trace)


class Video2RagAnswerer:
    """Control: filtered hybrid retrieval and a single answer call, no decomposition."""

    mode = "video2rag"

    def __init__(self, store, embedder, chat, k: int = 10, pad: float = 5.0, llm_time_filter: bool = True):
        self.store = store
        self.embedder = embedder
        self.chat = chat
        self.k = k
        self.pad = pad
        self.llm_time_filter = llm_time_filter

    def __call__(self, q: EvalQuestion) -> Prediction:
        trace = Trace()
        llm = self.chat if self.llm_time_filter else None
        flt = extract_time_filter(q.question, llm, self.pad)
        hits = retrieve(self.store, self.embedder, Query(q.question, q.video_id, flt), self.k, trace)
        text = self.chat.chat(answer_request(q.question, hits, (), (), q.options))
        trace.add("answered", hits=[h.entry.entry_id for h in hits])
        return Prediction(text, trace)


# ------------------------------------------------------------------ reports

@dataclass
class QuestionRecord:
    qid: str
    category: str
    video_type: str
    predicted: str
    correct: bool
    rule: str
    note: str = ""


@dataclass
class EvalReport:
    mode: str
    records: list[QuestionRecord] = field(default_factory=list)

    @staticmethod
    def _group(records, key) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for r in records:
            g = out.setdefault(getattr(r, key), {"n": 0, "correct": 0})
            g["n"] += 1
            g["correct"] += int(r.correct)
        for g in out.values():
            g["accuracy"] = g["correct"] / g["n"]
        return dict(sorted(out.items()))

    @property
    def by_category(self) -> dict[str, dict]:
        return self._group(self.records, "category")

    @property
    def by_video_type(self) -> dict[str, dict]:
        return self._group(self.records, "video_type")

    @property
    def total(self) -> dict:
        n = len(self.records)
        c = sum(r.correct for r in self.records)
        return {"n": n, "correct": c, "accuracy": c / n if n else 0.0}

    def accuracy(self, category: str | None = None) -> float:
        if category is None:
            return self.total["accuracy"]
        return self.by_category.get(category, {"accuracy": 0.0})["accuracy"]

    def verify(self) -> "EvalReport":
        """Recompute every aggregate from the records and check they agree."""
        ids = [r.qid for r in self.records]
        if len(ids) != len(set(ids)):
            raise VQAgentError("a question was scored more than once")
        for groups in (self.by_category, self.by_video_type):
            if sum(g["n"] for g in groups.values()) != len(self.records):
                raise VQAgentError("groups do not partition the records")
            for g in groups.values():
                if not 0.0 <= g["accuracy"] <= 1.0 or not math.isclose(g["accuracy"], g["correct"] / g["n"]):
                    raise VQAgentError("inconsistent group accuracy")
        return self

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "total": self.total,
            "by_category": self.by_category,
            "by_video_type": self.by_video_type,
            "legend": LEGEND,
            "records": [asdict(r) for r in self.records],
        }

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"json": out / f"report_{self.mode}.json", "tsv": out / f"records_{self.mode}.tsv"}
        paths["json"].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        with open(paths["tsv"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["qid", "category", "video_type", "correct", "rule", "predicted", "note"])
            for r in self.records:
                w.writerow([r.qid, r.category, r.video_type, int(r.correct), r.rule, " ".join(r.predicted.split()), r.note])
        return paths


def score_question(q: EvalQuestion, predicted: str) -> tuple[bool, str, str]:
    if q.category == "event_localization":
        return judge_localization(predicted, q.ground_truth)
    ok, note = judge_choice(predicted, q.ground_truth, (q.options or {}).keys())
    return ok, "choice-set", note


def run_benchmark(
    questions: list[EvalQuestion],
    answerer: Answerer,
    library: VideoLibrary | None = None,
    mode: str | None = None,
    concurrency: int = 1,
    traces: dict | None = None,
) -> EvalReport:
    """Answer and score every question; one failing question never aborts the run."""

    def video_type(q):
        if q.video_type:
            return q.video_type
        if library is not None and q.video_id in library:
            return library.get(q.video_id).video_type or "unknown"
        return "unknown"

    def one(q):
        try:
            pred = answerer(q)
        except VQAgentError as exc:
            return q, None, f"answerer failed: {exc}"
        return q, pred, ""

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(pool.map(one, questions))
    report = EvalReport(mode or getattr(answerer, "mode", "custom"))
    for q, pred, err in results:
        if pred is None:
            report.records.append(QuestionRecord(q.qid, q.category, video_type(q), "", False, "error", err))
            continue
        if traces is not None and pred.trace is not None:
            traces[q.qid] = pred.trace
        ok, rule, note = score_question(q, pred.text)
        report.records.append(QuestionRecord(q.qid, q.category, video_type(q), pred.text, ok, rule, note))
    return report.verify()
