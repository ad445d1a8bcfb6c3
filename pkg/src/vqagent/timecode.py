"""Timestamp parsing and formatting.

Canonical rendering is ``HH:MM:SS`` with an optional ``.fff`` fraction;
``MM:SS`` and ``H:MM:SS`` are accepted on input.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import InvalidInput

_TS = r"(?:\d{1,2}:)?\d{1,3}:\d{2}(?:\.\d+)?"
TIMESTAMP_RE = re.compile(rf"(?<![\d:.])({_TS})(?![\d:])")
_BRACKET_RE = re.compile(r"\[([^\[\]]*)\]")
_RANGE_RE = re.compile(rf"(?<![\d:.])({_TS})\s*(?:-|–|to)\s*({_TS})(?![\d:])")


def _split(text: str) -> tuple[float, float, float]:
    parts = text.strip().split(":")
    if len(parts) == 2:
        h, m, s = "0", parts[0], parts[1]
    elif len(parts) == 3:
        h, m, s = parts
    else:
        raise InvalidInput(f"not a timestamp: {text!r}")
    try:
        return float(int(h)), float(int(m)), float(s)
    except ValueError:
        raise InvalidInput(f"not a timestamp: {text!r}") from None


def parse_timestamp(text: str) -> float:
    """Parse ``HH:MM:SS(.fff)`` or ``MM:SS`` into seconds.

    Seconds must be below 60; minutes must be below 60 when hours are given.
    """
    h, m, s = _split(text)
    if s >= 60 or (text.count(":") == 2 and m >= 60):
        raise InvalidInput(f"timestamp field out of range: {text!r}")
    return h * 3600 + m * 60 + s


def parse_timestamp_lenient(text: str) -> float:
    """Like :func:`parse_timestamp` but lets fields overflow ("99:99" -> 6039 s)."""
    h, m, s = _split(text)
    return h * 3600 + m * 60 + s


def to_seconds(value, lenient: bool = False) -> float:
    """Coerce a number or timestamp string to seconds."""
    if isinstance(value, bool):
        raise InvalidInput(f"not a time value: {value!r}")
    if isinstance(value, (int, float)):
        seconds = float(value)
    elif isinstance(value, str):
        stripped = value.strip()
        try:
            seconds = float(stripped)
        except ValueError:
            seconds = parse_timestamp_lenient(stripped) if lenient else parse_timestamp(stripped)
    else:
        raise InvalidInput(f"not a time value: {value!r}")
    if not math.isfinite(seconds):
        raise InvalidInput(f"non-finite time value: {value!r}")
    return seconds


def format_timestamp(seconds: float) -> str:
    if seconds < 0 or not math.isfinite(seconds):
        raise InvalidInput(f"cannot format {seconds!r} as a timestamp")
    whole = round(seconds)
    if abs(seconds - whole) < 1e-6:
        frac = ""
    else:
        whole = math.floor(seconds)
        frac = f"{seconds - whole:.3f}"[1:]
    h, rem = divmod(int(whole), 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}{frac}"


@dataclass(frozen=True)
class TimeItem:
    """A point (``lo == hi`` and ``is_span`` false) or a span."""

    lo: float
    hi: float
    is_span: bool

    @property
    def midpoint(self) -> float:
        return (self.lo + self.hi) / 2


def parse_time_items(text: str) -> list[TimeItem]:
    """Extract points and spans from free text, in order of appearance.

    ``[a, b]`` and ``a - b`` / ``a to b`` are spans; ``[a]`` and bare
    timestamps are points.
    """
    found: list[tuple[int, TimeItem]] = []
    taken: list[tuple[int, int]] = []

    def free(start, end):
        return all(end <= a or start >= b for a, b in taken)

    for m in _BRACKET_RE.finditer(text):
        stamps = [parse_timestamp_lenient(t) for t in TIMESTAMP_RE.findall(m.group(1))]
        taken.append(m.span())
        if len(stamps) == 1:
            found.append((m.start(), TimeItem(stamps[0], stamps[0], False)))
        elif len(stamps) == 2:
            found.append((m.start(), TimeItem(stamps[0], stamps[1], True)))
    for m in _RANGE_RE.finditer(text):
        if free(*m.span()):
            taken.append(m.span())
            lo, hi = parse_timestamp_lenient(m.group(1)), parse_timestamp_lenient(m.group(2))
            found.append((m.start(), TimeItem(lo, hi, True)))
    for m in TIMESTAMP_RE.finditer(text):
        if free(*m.span()):
            t = parse_timestamp_lenient(m.group(1))
            found.append((m.start(), TimeItem(t, t, False)))
    found.sort(key=lambda pair: pair[0])
    return [item for _, item in found]
