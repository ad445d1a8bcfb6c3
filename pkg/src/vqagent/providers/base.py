"""Provider interfaces, request model and response contracts."""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field

from ..errors import ContractViolation, InvalidInput
from ..text import extract_json

CONTRACT_FIELDS = {
    "free-text": (),
    "structured-verdict": ("type",),
    "structured-plan": ("success",),
    "structured-caption": (
        "time_context",
        "location",
        "characters",
        "events_chronological",
        "scene_details",
        "summary",
    ),
    "structured-time": (),
}


@dataclass(frozen=True)
class Message:
    role: str
    text: str


@dataclass
class ChatRequest:
    messages: list[Message]
    images: list[str] = field(default_factory=list)
    contract: str = "free-text"
    # Routing hint for mocks and logs; not part of the digest.
    purpose: str = ""
    enforce_contract: bool = True

    def __post_init__(self):
        if not self.messages:
            raise InvalidInput("a chat request needs at least one message")
        if self.contract not in CONTRACT_FIELDS:
            raise InvalidInput(f"unknown response contract {self.contract!r}")

    @property
    def user_text(self) -> str:
        return "\n".join(m.text for m in self.messages if m.role != "system")


def request_digest(req: ChatRequest) -> str:
    """Stable key over role-tagged messages, image refs and contract name."""
    canonical = json.dumps(
        {
            "contract": req.contract,
            "images": list(req.images),
            "messages": [[m.role, m.text] for m in req.messages],
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )
    return hashlib.sha256(canonical.encode("ascii")).hexdigest()


def check_contract(contract: str, text: str) -> None:
    required = CONTRACT_FIELDS[contract]
    if contract == "free-text":
        if not text.strip():
            raise ContractViolation("empty free-text response")
        return
    obj = extract_json(text)
    if obj is None:
        raise ContractViolation(f"{contract}: response holds no JSON object")
    missing = [name for name in required if name not in obj]
    if missing:
        raise ContractViolation(f"{contract}: missing fields {missing}")


class ChatProvider:
    name = "chat"

    def chat(self, req: ChatRequest) -> str:
        text = self._complete(req)
        if req.enforce_contract:
            check_contract(req.contract, text)
        return text

    def _complete(self, req: ChatRequest) -> str:
        raise NotImplementedError


class EmbeddingProvider:
    name = "embedding"
    dimension: int

    def embed(self, text: str):
        raise NotImplementedError


class AsrProvider:
    def transcribe(self, audio_ref):
        """Return utterances (speaker may be a placeholder before diarization)."""
        raise NotImplementedError


class DiarizationProvider:
    def assign(self, audio_ref, utterances):
        raise NotImplementedError


class DetectorProvider:
    name = "detector"

    def detect(self, frame):
        raise NotImplementedError


class SearchProvider:
    def search(self, query: str) -> list[str]:
        raise NotImplementedError


class LimitedChat(ChatProvider):
    """Caps concurrent calls into a wrapped provider."""

    def __init__(self, inner: ChatProvider, max_concurrent: int):
        self.inner = inner
        self.name = inner.name
        self._sem = threading.BoundedSemaphore(max_concurrent)

    def chat(self, req):
        with self._sem:
            return self.inner.chat(req)
