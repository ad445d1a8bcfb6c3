"""Deterministic scripted chat provider.

Lookup order for a request:

1. ``responses``: exact request digest -> response text.
2. ``rules``: first rule whose ``purpose`` matches and whose ``match`` regex
   is found in the request's task/question section. A rule replies with a
   literal (string or JSON object, with ``{group}`` / ``{result}``
   placeholders) and may first run a *skill* that reads the rest of the
   prompt, e.g. "earliest timestamped line mentioning X".
3. Built-in behaviour for perception purposes (``caption``, ``rewind``) and
   ``synthesis``, computed from what the frames show.

Anything else raises :class:`MissingScriptError`.

Frames are "seen" through a ``vision`` callable mapping a frame reference to
a text line (see :meth:`vqagent.video.VideoLibrary.perceive`), so the mock
only knows what was actually put in front of it.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable

from ..errors import MissingScriptError
from ..timecode import format_timestamp, parse_timestamp_lenient
from .base import ChatProvider, ChatRequest, request_digest

SECTION_RE = re.compile(r"^## (.+?)\s*$", re.MULTILINE)
BLOCK_RE = re.compile(r"^### Segment (\S+)-(\S+).*$", re.MULTILINE)
LEADING_TS_RE = re.compile(r"^\s*(?:-\s*)?(\d{1,2}:\d{2}:\d{2}(?:\.\d+)?)\b")
FRAME_LINE_RE = re.compile(r"^-\s*(\S+@\d+(?:\.\d+)?)(?:\s+labels:\s*(.*))?$")
TRANSCRIPT_LINE_RE = re.compile(r"^\S+-\S+ ([^:]+): (.*)$")

# Sections that describe the job rather than evidence about the video.
NON_EVIDENCE = {"task", "question", "original question", "tools", "instruction", "reason", "frames", "options"}


class Value(str):
    """A string result that can also carry attributes for ``{result.attr}`` placeholders."""

    def __new__(cls, text, **attrs):
        obj = super().__new__(cls, text)
        obj.__dict__.update(attrs)
        return obj


class RequestView:
    """Parsed view of a prompt: named sections, evidence lines and seen frames."""

    def __init__(self, req: ChatRequest, vision: Callable[[str], str] | None = None):
        self.req = req
        text = req.user_text
        self.sections: dict[str, str] = {}
        heads = list(SECTION_RE.finditer(text))
        for i, m in enumerate(heads):
            end = heads[i + 1].start() if i + 1 < len(heads) else len(text)
            self.sections[m.group(1).strip().casefold()] = text[m.end():end].strip("\n")
        if not heads:
            self.sections["question"] = text
        self.primary = (
            self.sections.get("task") or self.sections.get("question") or self.sections.get("instruction") or ""
        ).strip()
        labels = {}
        for line in self.sections.get("frames", "").splitlines():
            m = FRAME_LINE_RE.match(line.strip())
            if m:
                labels[m.group(1)] = (m.group(2) or "").strip()
        self.seen: list[str] = []
        for ref in req.images:
            line = vision(ref) if vision is not None else ref
            if labels.get(ref):
                line += f" | labels: {labels[ref]}"
            self.seen.append(line)
        evidence = [body for name, body in self.sections.items() if name not in NON_EVIDENCE]
        self._evidence = evidence
        self.corpus = "\n".join(evidence + self.seen)
        self.lines = [ln.strip() for ln in self.corpus.splitlines() if ln.strip()]

    def timestamped(self, needle: str) -> list[float]:
        needle = needle.casefold()
        out = []
        for line in self.lines:
            m = LEADING_TS_RE.match(line)
            if m and needle in line.casefold():
                out.append(parse_timestamp_lenient(m.group(1)))
        return sorted(out)

    def blocks(self) -> list[tuple[float, float, str]]:
        """Segment blocks as (start, end, body); a block never runs past its section."""
        out = []
        for text in self._evidence:
            heads = list(BLOCK_RE.finditer(text))
            for i, m in enumerate(heads):
                end = heads[i + 1].start() if i + 1 < len(heads) else len(text)
                out.append((parse_timestamp_lenient(m.group(1)), parse_timestamp_lenient(m.group(2)), text[m.end():end]))
        return sorted(out, key=lambda b: b[0])

    def block_with(self, needle: str):
        needle = needle.casefold()
        for lo, hi, body in self.blocks():
            if needle in body.casefold():
                return lo, hi
        return None


def _span_text(lo: float, hi: float) -> str:
    return f"[{format_timestamp(lo)}, {format_timestamp(hi)}]"


# ---------------------------------------------------------------- skills

def skill_first_time(view: RequestView, needle: str) -> Value:
    times = view.timestamped(needle)
    if times:
        return Value(format_timestamp(times[0]))
    block = view.block_with(needle)
    if block:
        return Value(_span_text(*block))
    return Value("unknown")


def skill_span(view: RequestView, needle: str, max_gap: float = 1.0) -> Value:
    times = view.timestamped(needle)
    if times:
        lo = hi = times[0]
        for t in times[1:]:
            if t - hi > max_gap + 1e-9:
                break
            hi = t
        return Value(_span_text(lo, hi))
    block = view.block_with(needle)
    if block:
        return Value(_span_text(*block))
    return Value("unknown")


def skill_segment_of(view: RequestView, needle: str) -> Value:
    block = view.block_with(needle)
    if block is None:
        return Value("unknown", start="unknown", end="unknown")
    lo, hi = block
    return Value(_span_text(lo, hi), start=format_timestamp(lo), end=format_timestamp(hi))


def skill_choose(view: RequestView, options: dict[str, Any], within: str | None = None) -> Value:
    """Labels whose needles all occur in the evidence (or in the one segment block holding ``within``)."""
    corpus = view.corpus.casefold()
    if within is not None:
        needle = within.casefold()
        bodies = [body for _, _, body in view.blocks() if needle in body.casefold()]
        if not bodies:
            return Value("none")
        corpus = bodies[0].casefold()
    picked = []
    for label in sorted(options):
        needles = options[label]
        if isinstance(needles, str):
            needles = [needles]
        if needles and all(n.casefold() in corpus for n in needles):
            picked.append(label)
    return Value(", ".join(picked) if picked else "none")


def skill_grep(view: RequestView, needle: str) -> Value:
    needle = needle.casefold()
    hits = [ln for ln in view.lines if needle in ln.casefold()]
    return Value("\n".join(hits) if hits else "none")


def skill_extract(view: RequestView, pattern: str) -> Value:
    m = re.search(pattern, view.corpus, re.IGNORECASE | re.MULTILINE)
    if not m:
        return Value("unknown")
    return Value((m.group(1) if m.groups() else m.group(0)).strip())


SKILLS: dict[str, Callable[..., Value]] = {
    "first_time": skill_first_time,
    "span": skill_span,
    "segment_of": skill_segment_of,
    "choose": skill_choose,
    "grep": skill_grep,
    "extract": skill_extract,
}

_PLACEHOLDER_RE = re.compile(r"\{(\w+)(?:\.(\w+))?\}")


def _fill(template, mapping: dict):
    if isinstance(template, str):
        def sub(m):
            if m.group(1) not in mapping:
                return m.group(0)
            value = mapping[m.group(1)]
            if m.group(2):
                value = getattr(value, m.group(2), m.group(0))
            return str(value)

        return _PLACEHOLDER_RE.sub(sub, template)
    if isinstance(template, dict):
        return {k: _fill(v, mapping) for k, v in template.items()}
    if isinstance(template, list):
        return [_fill(v, mapping) for v in template]
    return template


@dataclass
class Rule:
    match: str
    purpose: str | None = None
    reply: Any = None
    skill: str | None = None
    args: dict = field(default_factory=dict)

    def __post_init__(self):
        self._re = re.compile(self.match, re.IGNORECASE)
        if self.skill is not None and self.skill not in SKILLS:
            raise ValueError(f"unknown skill {self.skill!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "Rule":
        return cls(
            match=data["match"],
            purpose=data.get("purpose"),
            reply=data.get("reply"),
            skill=data.get("skill"),
            args=dict(data.get("args") or {}),
        )

    def groups(self, view: RequestView, purpose: str) -> dict | None:
        if self.purpose not in (None, "*", purpose):
            return None
        m = self._re.search(view.primary)
        if not m:
            return None
        return {k: v for k, v in m.groupdict().items() if v is not None}

    def respond(self, view: RequestView, groups: dict) -> str:
        mapping: dict[str, Any] = dict(groups)
        if self.skill:
            mapping["result"] = SKILLS[self.skill](view, **_fill(self.args, groups))
        if self.reply is None:
            return str(mapping.get("result", ""))
        filled = _fill(self.reply, mapping)
        return filled if isinstance(filled, str) else json.dumps(filled, sort_keys=True)


# ------------------------------------------------------ built-in behaviour

def _parse_seen(line: str) -> dict:
    parts = [p.strip() for p in line.split(" | ")]
    out: dict[str, Any] = {"ts": parts[0]}
    for p in parts[1:]:
        key, _, value = p.partition(": ")
        out[key] = value
    return out


def _uniq(items):
    seen, out = set(), []
    for it in items:
        if it and it not in seen:
            seen.add(it)
            out.append(it)
    return out


def default_caption(view: RequestView) -> str:
    frames = [_parse_seen(ln) for ln in view.seen]
    times = Counter(f["time"] for f in frames if f.get("time"))
    time_context = max(times, key=lambda t: (times[t], -list(times).index(t))) if times else "unknown"
    locations = _uniq(f.get("location") for f in frames)
    scenes = _uniq(f.get("scene") for f in frames)
    events = _uniq(e.strip() for f in frames for e in f.get("events", "").split(";"))
    objects = _uniq(o.strip() for f in frames for o in f.get("objects", "").split(","))
    labels = _uniq(lb.strip() for f in frames for lb in f.get("labels", "").split(";"))
    dialogue, speakers = [], []
    for line in view.sections.get("transcript", "").splitlines():
        m = TRANSCRIPT_LINE_RE.match(line.strip())
        if m:
            speakers.append(m.group(1).strip())
            dialogue.append(f'{m.group(1).strip()} says "{m.group(2).strip()}"')
    characters = _uniq(labels + speakers)
    details = []
    if objects:
        details.append("Visible: " + ", ".join(objects) + ".")
    if dialogue:
        details.append("Dialogue: " + "; ".join(dialogue) + ".")
    summary = " then ".join(scenes) if scenes else "unknown scene"
    if events:
        summary += ": " + "; ".join(events)
    caption = {
        "time_context": time_context,
        "location": "; ".join(locations) or "unknown",
        "characters": "; ".join(characters) or "unknown",
        "events_chronological": events,
        "scene_details": " ".join(details) or "unknown",
        "summary": summary,
    }
    return json.dumps(caption, sort_keys=True)


def default_rewind(view: RequestView) -> str:
    lines = list(view.seen)
    changes = []
    prev = None
    for ln in view.seen:
        f = _parse_seen(ln)
        scene = f.get("scene")
        if prev is not None and scene and scene != prev:
            changes.append(f"Scene change at {f['ts']}: {prev} -> {scene}")
        prev = scene or prev
    if not lines:
        return "No frames were available in the requested span."
    lines.extend(ln.strip() for ln in view.sections.get("transcript", "").splitlines() if ln.strip())
    lines.extend(changes or ["No scene change observed."])
    return "\n".join(lines)


RESULT_HEAD_RE = re.compile(r"^### \[(\w+)\] (.*)$", re.MULTILINE)


def default_synthesis(view: RequestView) -> str:
    body = view.sections.get("results", "")
    heads = list(RESULT_HEAD_RE.finditer(body))
    done, failed = [], []
    for i, m in enumerate(heads):
        end = heads[i + 1].start() if i + 1 < len(heads) else len(body)
        content = body[m.end():end].strip()
        if m.group(1) == "success":
            done.append(content)
        else:
            failed.append((m.group(2).strip(), content.removeprefix("Failure:").strip()))
    text = done[-1] if done else "unknown"
    for desc, reason in failed:
        text += f"\nCaveat: could not complete '{desc}': {reason}"
    return text


DEFAULTS: dict[str, Callable[[RequestView], str]] = {
    "caption": default_caption,
    "rewind": default_rewind,
    "synthesis": default_synthesis,
}


class ScriptedChat(ChatProvider):
    name = "scripted"

    def __init__(self, responses: dict[str, str] | None = None, rules=None, vision=None, defaults: bool = True):
        self.responses = dict(responses or {})
        self.rules = [r if isinstance(r, Rule) else Rule.from_dict(r) for r in (rules or [])]
        self.vision = vision
        self.defaults = defaults

    @classmethod
    def from_dict(cls, data: dict, vision=None) -> "ScriptedChat":
        return cls(data.get("responses"), data.get("rules"), vision)

    @classmethod
    def from_file(cls, path, vision=None) -> "ScriptedChat":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), vision)

    def _complete(self, req: ChatRequest) -> str:
        digest = request_digest(req)
        if digest in self.responses:
            return self.responses[digest]
        view = RequestView(req, self.vision)
        for rule in self.rules:
            groups = rule.groups(view, req.purpose)
            if groups is not None:
                return rule.respond(view, groups)
        if self.defaults and req.purpose in DEFAULTS:
            return DEFAULTS[req.purpose](view)
        raise MissingScriptError(
            f"no scripted response for {req.purpose or req.contract} request {digest[:12]}: {view.primary[:80]!r}"
        )
