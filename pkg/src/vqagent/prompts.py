"""Prompt templates.

Every prompt is a system instruction plus one user message made of ``## ``
sections. Section names are part of the contract with the scripted mock
(task/question/tools/instruction sections are not treated as evidence).
Bump ``PROMPT_VERSION`` whenever wording changes, since scripted digests
depend on it.
"""

from __future__ import annotations

import json

from .providers.base import ChatRequest, Message
from .timecode import format_timestamp

PROMPT_VERSION = "2"

CAPTION_DIMENSIONS = (
    ("time_context", "Time of day, season or date shown, if any."),
    ("location", "Setting of the segment."),
    ("characters", "Who appears (use box labels for names) and what each does."),
    ("events_chronological", "What happens, one item per event, earliest first."),
    ("scene_details", "Visible objects, text and dialogue worth remembering."),
    ("summary", "One or two sentences on the whole segment."),
)

_CAPTION_SYSTEM = (
    f"[prompt v{PROMPT_VERSION}] You caption one video segment from annotated frames and its transcript. "
    "Boxes drawn on frames carry recognised identities. Reply with a JSON object with these fields:\n"
    + "\n".join(f"- {name}: {desc}" for name, desc in CAPTION_DIMENSIONS)
    + "\nevents_chronological is a list of strings; every other field is a string ('unknown' if absent)."
)

_CONQUEROR_SYSTEM = (
    f"[prompt v{PROMPT_VERSION}] You judge one task of a video question-answering agent. Reply with JSON "
    '{"type": "too_complex", "reason": ...} when the task must be split, '
    '{"type": "requires_tool", "tool": {"name": ..., "args": {...}}} when a listed tool is needed, or '
    '{"type": "direct_answer", "answer": ...} when the context already answers it.'
)

_DIVIDER_SYSTEM = (
    f"[prompt v{PROMPT_VERSION}] Split the task into an ordered list of simpler subtasks whose results together "
    'answer it. Reply with JSON {"success": true, "tasks": [...]} or {"success": false, "reason": ...}.'
)

_REWIND_SYSTEM = (
    f"[prompt v{PROMPT_VERSION}] You re-watch frames from a span of the original video. Follow the "
    "instruction, cite the timestamp of every observation, and report scene changes explicitly."
)

_SYNTHESIS_SYSTEM = (
    f"[prompt v{PROMPT_VERSION}] Compose the final answer to the question from the subtask results. "
    "Mention any subtask that failed and how that limits the answer."
)

_ANSWER_SYSTEM = (
    f"[prompt v{PROMPT_VERSION}] Answer the question about the video from the material provided. "
    "For multiple choice reply with the option letters; for times reply HH:MM:SS or [HH:MM:SS, HH:MM:SS]."
)

_TIME_SYSTEM = (
    f"[prompt v{PROMPT_VERSION}] Extract the time window a question refers to. Reply with JSON "
    '{"t_lo": seconds, "t_hi": seconds} or {"none": true}.'
)


def _sections(pairs) -> str:
    return "\n\n".join(f"## {name}\n{body}" for name, body in pairs if body is not None)


def render_hits(hits) -> str:
    if not hits:
        return "(no retrieved segments)"
    out = []
    for h in hits:
        e = h.entry
        out.append(
            f"### Segment {format_timestamp(e.start_ts)}-{format_timestamp(e.end_ts)} (video {e.video_id})\n{e.caption_text}"
        )
    return "\n".join(out)


def render_notes(notes) -> str | None:
    if not notes:
        return None
    return "\n".join(f"- {desc}:\n{content}" for desc, content in notes)


def render_frames(frames) -> str:
    lines = []
    for f in frames:
        line = f"- {f.ref}"
        if f.annotations:
            line += " labels: " + "; ".join(a.label for a in f.annotations)
        lines.append(line)
    return "\n".join(lines) or "(none)"


def render_transcript(utterances) -> str | None:
    if not utterances:
        return None
    return "\n".join(u.render() for u in utterances)


def _options(options) -> str | None:
    return "\n".join(f"{k}. {v}" for k, v in sorted(options.items())) if options else None


def conqueror_request(task: str, query: str, hits, notes, catalog: list[dict], enforce=True, options=None) -> ChatRequest:
    body = _sections(
        [
            ("Task", task),
            ("Original question", query if query != task else None),
            ("Options", _options(options)),
            ("Context", render_hits(hits)),
            ("Prior results", render_notes(notes)),
            ("Tools", json.dumps(catalog, indent=1, sort_keys=True)),
        ]
    )
    return ChatRequest(
        [Message("system", _CONQUEROR_SYSTEM), Message("user", body)],
        contract="structured-verdict",
        purpose="conqueror",
        enforce_contract=enforce,
    )


def divider_request(task: str, reason: str, query: str, hits, notes, options=None) -> ChatRequest:
    body = _sections(
        [
            ("Task", task),
            ("Reason", reason),
            ("Original question", query if query != task else None),
            ("Options", _options(options)),
            ("Context", render_hits(hits)),
            ("Prior results", render_notes(notes)),
        ]
    )
    return ChatRequest(
        [Message("system", _DIVIDER_SYSTEM), Message("user", body)],
        contract="structured-plan",
        purpose="divider",
    )


def caption_request(frames, utterances) -> ChatRequest:
    body = _sections(
        [
            ("Instruction", "Caption this segment."),
            ("Frames", render_frames(frames)),
            ("Transcript", render_transcript(utterances) or "(no speech)"),
        ]
    )
    return ChatRequest(
        [Message("system", _CAPTION_SYSTEM), Message("user", body)],
        images=[f.ref for f in frames],
        contract="structured-caption",
        purpose="caption",
    )


def rewind_request(instruction: str, frames, utterances) -> ChatRequest:
    body = _sections(
        [
            ("Instruction", instruction),
            ("Frames", render_frames(frames)),
            ("Transcript", render_transcript(utterances)),
        ]
    )
    return ChatRequest(
        [Message("system", _REWIND_SYSTEM), Message("user", body)],
        images=[f.ref for f in frames],
        purpose="rewind",
    )


def synthesis_request(query: str, leaves, options=None) -> ChatRequest:
    blocks = []
    for node in leaves:
        desc = " ".join(node.description.split())
        if node.status.value == "success":
            blocks.append(f"### [success] {desc}\n{node.result.content}")
        else:
            blocks.append(f"### [{node.status.value}] {desc}\nFailure: {node.failure_reason or 'not executed'}")
    body = _sections([("Question", query), ("Options", _options(options)), ("Results", "\n".join(blocks))])
    return ChatRequest(
        [Message("system", _SYNTHESIS_SYSTEM), Message("user", body)],
        purpose="synthesis",
    )


def answer_request(question: str, hits=None, frames=(), utterances=(), options: dict | None = None) -> ChatRequest:
    body = _sections(
        [
            ("Question", question),
            ("Options", _options(options)),
            ("Context", render_hits(hits) if hits is not None else None),
            ("Frames", render_frames(frames) if frames else None),
            ("Transcript", render_transcript(utterances)),
        ]
    )
    return ChatRequest(
        [Message("system", _ANSWER_SYSTEM), Message("user", body)],
        images=[f.ref for f in frames],
        purpose="answer",
    )


def time_request(query: str) -> ChatRequest:
    return ChatRequest(
        [Message("system", _TIME_SYSTEM), Message("user", _sections([("Question", query)]))],
        contract="structured-time",
        purpose="time_extract",
    )
