"""Model-service providers: interfaces, live HTTP adapters and offline mocks.

Configuration is a JSON object keyed by provider name (``chat``,
``embedding``, ``asr``, ``diarizer``, ``detector``, ``search``), each entry a
:class:`ProviderConfig`. Live endpoints and keys may come from the
environment as ``OM_PROVIDER_<NAME>_URL`` and ``OM_PROVIDER_<NAME>_KEY``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..errors import InvalidInput, ProviderError
from .base import (
    AsrProvider,
    ChatProvider,
    ChatRequest,
    DetectorProvider,
    DiarizationProvider,
    EmbeddingProvider,
    LimitedChat,
    Message,
    SearchProvider,
    check_contract,
    request_digest,
)
from .fixture import FixtureASR, FixtureDetector, PassthroughDiarizer, ScriptedSearch, UnconfiguredSearch
from .hashing import HashEmbedder
from .http import HttpASR, HttpChat, HttpClient, HttpDetector, HttpEmbedder, HttpSearch
from .scripted import ScriptedChat

KINDS = ("live_http", "scripted_mock", "hash_mock")

__all__ = [
    "AsrProvider", "ChatProvider", "ChatRequest", "DetectorProvider", "DiarizationProvider",
    "EmbeddingProvider", "HashEmbedder", "LimitedChat", "Message", "ProviderConfig", "Providers",
    "ScriptedChat", "ScriptedSearch", "SearchProvider", "build_providers", "check_contract",
    "load_provider_config", "request_digest",
]


@dataclass
class ProviderConfig:
    kind: str
    endpoint: str | None = None
    auth: str | None = None  # name of the env var holding the API key
    script_path: str | None = None
    timeout: float = 60.0
    max_retries: int = 2
    dimension: int = 256
    max_concurrent: int | None = None

    def validate(self, name: str) -> "ProviderConfig":
        if self.kind not in KINDS:
            raise InvalidInput(f"{name}: unknown provider kind {self.kind!r}")
        if self.kind == "live_http" and not self.endpoint:
            raise InvalidInput(f"{name}: live_http requires an endpoint")
        if self.kind == "scripted_mock" and name in ("chat", "search") and not self.script_path:
            raise InvalidInput(f"{name}: scripted_mock requires script_path")
        return self


class _UnconfiguredChat(ChatProvider):
    name = "unconfigured"

    def _complete(self, req):
        raise ProviderError("no chat provider configured (pass --providers or set OM_PROVIDER_CHAT_URL)")


@dataclass
class Providers:
    chat: ChatProvider = field(default_factory=_UnconfiguredChat)
    embedder: EmbeddingProvider = field(default_factory=HashEmbedder)
    asr: AsrProvider = field(default_factory=FixtureASR)
    diarizer: DiarizationProvider = field(default_factory=PassthroughDiarizer)
    detector: DetectorProvider | None = field(default_factory=FixtureDetector)
    search: SearchProvider = field(default_factory=UnconfiguredSearch)


def load_provider_config(source) -> dict[str, ProviderConfig]:
    """Read a provider config from a path or dict; relative script paths resolve against the file."""
    base = None
    if isinstance(source, (str, os.PathLike)):
        base = Path(source).resolve().parent
        with open(source, encoding="utf-8") as fh:
            source = json.load(fh)
    known = {f.name for f in fields(ProviderConfig)}
    out = {}
    for name, raw in source.items():
        unknown = set(raw) - known
        if unknown:
            raise InvalidInput(f"{name}: unknown config keys {sorted(unknown)}")
        cfg = ProviderConfig(**raw)
        if cfg.script_path and base is not None and not os.path.isabs(cfg.script_path):
            cfg.script_path = str(base / cfg.script_path)
        out[name] = cfg
    return out


def _env_config(name: str) -> ProviderConfig | None:
    url = os.environ.get(f"OM_PROVIDER_{name.upper()}_URL")
    if url:
        return ProviderConfig(kind="live_http", endpoint=url, auth=f"OM_PROVIDER_{name.upper()}_KEY")
    return None


def _client(name: str, cfg: ProviderConfig) -> HttpClient:
    key_var = cfg.auth or f"OM_PROVIDER_{name.upper()}_KEY"
    return HttpClient(cfg.endpoint, os.environ.get(key_var), cfg.timeout, cfg.max_retries)


def _image_loader(library):
    def load(ref):
        try:
            frame = library.frame(ref)
        except InvalidInput:
            return None
        if frame.image_ref and os.path.exists(frame.image_ref):
            with open(frame.image_ref, "rb") as fh:
                return fh.read()
        return None

    return load


def build_providers(config: dict[str, ProviderConfig] | None = None, library=None) -> Providers:
    """Assemble providers; unnamed ones fall back to env vars, then to offline defaults."""
    config = dict(config or {})
    for name in ("chat", "embedding", "asr", "diarizer", "detector", "search"):
        if name not in config:
            env = _env_config(name)
            if env is not None:
                config[name] = env
    p = Providers(asr=FixtureASR(library))
    vision = library.perceive if library is not None else None
    for name, cfg in config.items():
        cfg.validate(name)
        live = cfg.kind == "live_http"
        if name == "chat":
            if live:
                p.chat = HttpChat(_client(name, cfg), _image_loader(library) if library else None)
            else:
                p.chat = ScriptedChat.from_file(cfg.script_path, vision=vision)
            if cfg.max_concurrent:
                p.chat = LimitedChat(p.chat, cfg.max_concurrent)
        elif name == "embedding":
            p.embedder = HttpEmbedder(_client(name, cfg), cfg.dimension) if live else HashEmbedder(cfg.dimension)
        elif name == "asr":
            p.asr = HttpASR(_client(name, cfg)) if live else FixtureASR(library)
        elif name == "diarizer":
            p.diarizer = PassthroughDiarizer()
        elif name == "detector":
            p.detector = HttpDetector(_client(name, cfg)) if live else FixtureDetector()
        elif name == "search":
            if live:
                p.search = HttpSearch(_client(name, cfg))
            else:
                with open(cfg.script_path, encoding="utf-8") as fh:
                    p.search = ScriptedSearch(json.load(fh))
        else:
            raise InvalidInput(f"unknown provider name {name!r}")
    return p
