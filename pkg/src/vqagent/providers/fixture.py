"""Fixture-backed ASR, diarization, detection and web search."""

from __future__ import annotations

import json
import logging
import os

from ..errors import InvalidInput, ProviderError
from ..video import Annotation, Utterance
from .base import AsrProvider, DetectorProvider, DiarizationProvider, SearchProvider

log = logging.getLogger(__name__)


class FixtureASR(AsrProvider):
    """Reads utterances from the manifest (``video:<id>``) or a transcript JSON file."""

    def __init__(self, library=None):
        self.library = library

    def transcribe(self, audio_ref):
        if audio_ref is None or audio_ref == "":
            return []
        if isinstance(audio_ref, str) and audio_ref.startswith("video:"):
            if self.library is None:
                raise InvalidInput("no video library to resolve audio reference")
            return list(self.library.get(audio_ref[len("video:"):]).transcript)
        if isinstance(audio_ref, (str, os.PathLike)) and os.path.exists(audio_ref):
            with open(audio_ref, encoding="utf-8") as fh:
                data = json.load(fh)
            return [Utterance(u.get("speaker", "unknown"), u["text"], float(u["t0"]), float(u["t1"])) for u in data]
        raise InvalidInput(f"cannot resolve audio reference {audio_ref!r}")


class PassthroughDiarizer(DiarizationProvider):
    """Fixture transcripts already carry speaker labels."""

    def assign(self, audio_ref, utterances):
        return list(utterances)


class FixtureDetector(DetectorProvider):
    name = "fixture-detector"

    def detect(self, frame):
        out = []
        for rec in frame.content.get("faces", []):
            ann = Annotation(tuple(float(v) for v in rec["box"]), rec["label"], self.name, float(rec.get("confidence", 1.0)))
            try:
                out.append(ann.validate())
            except InvalidInput as exc:
                log.warning("dropping detection on %s: %s", frame.ref, exc)
        return out


class ScriptedSearch(SearchProvider):
    def __init__(self, results: dict[str, list[str]]):
        self.results = {self._key(k): list(v) for k, v in results.items()}

    @staticmethod
    def _key(query: str) -> str:
        return " ".join(query.casefold().split())

    def search(self, query: str) -> list[str]:
        return list(self.results.get(self._key(query), []))


class UnconfiguredSearch(SearchProvider):
    def search(self, query: str) -> list[str]:
        raise ProviderError("web search is not configured (set OM_PROVIDER_SEARCH_URL)")
