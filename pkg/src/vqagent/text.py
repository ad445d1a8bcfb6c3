"""Tokenization and JSON extraction helpers shared by search and mocks."""

from __future__ import annotations

import json
import re
import string

_PUNCT = string.punctuation + "“”‘’«»…"
_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)

STOPWORDS = frozenset(
    "a an and are at be between by did do does for from has have how in is it its of on or "
    "the their there this to was were what when where which who why with".split()
)


def tokenize(text: str) -> list[str]:
    """Case-folded whitespace tokens with surrounding punctuation stripped."""
    out = []
    for raw in text.casefold().split():
        tok = raw.strip(_PUNCT)
        if tok:
            out.append(tok)
    return out


def extract_json(text: str):
    """Return the first JSON object found in ``text`` (fenced or bare), else None."""
    candidates = [m.group(1) for m in _FENCE_RE.finditer(text)]
    candidates.append(text)
    decoder = json.JSONDecoder()
    for chunk in candidates:
        chunk = chunk.strip()
        for start in [i for i, ch in enumerate(chunk) if ch == "{"]:
            try:
                obj, _ = decoder.raw_decode(chunk[start:])
            except json.JSONDecodeError:
                continue
            if isinstance(obj, dict):
                return obj
    return None
