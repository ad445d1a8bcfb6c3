"""Thin HTTP adapters for live model services.

Wire contract (JSON over POST, bearer auth when a key is configured):

* chat: ``{base}/chat/completions`` with ``{"messages": [{"role", "content"}],
  "images": [base64...], "response_format": contract}``; reply
  ``{"choices": [{"message": {"content": str}}]}``.
* embeddings: ``{base}/embeddings`` with ``{"input": str}``; reply
  ``{"data": [{"embedding": [float, ...]}]}``.
* asr: ``{base}/transcribe`` with ``{"audio": ref}``; reply
  ``{"utterances": [{"t0", "t1", "speaker", "text"}]}``.
* detect: ``{base}/detect`` with ``{"frame": ref, "image": base64|null}``;
  reply ``{"detections": [{"box": [x, y, w, h], "label", "confidence"}]}``.
* search: ``{base}/search`` with ``{"query": str}``; reply ``{"results": [str]}``.
"""

from __future__ import annotations

import base64
import logging
import os
import time

import httpx
import numpy as np

from ..errors import InvalidInput, ProviderError, ProviderHTTPError, ProviderTimeout
from ..video import Annotation, Utterance
from .base import AsrProvider, ChatProvider, DetectorProvider, EmbeddingProvider, SearchProvider

log = logging.getLogger(__name__)


class HttpClient:
    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 2,
        backoff_base: float = 0.5,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        if not endpoint:
            raise InvalidInput("live provider needs an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.sleep = sleep
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def post(self, path: str, payload: dict) -> dict:
        url = f"{self.endpoint}/{path.lstrip('/')}"
        last: ProviderError | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                resp = self._client.post(url, json=payload, headers=self._headers())
            except httpx.TimeoutException as exc:
                last = ProviderTimeout(f"timeout calling {url}: {exc}")
                continue
            except httpx.HTTPError as exc:
                last = ProviderHTTPError(f"transport error calling {url}: {exc}")
                continue
            if resp.status_code >= 400:
                last = ProviderHTTPError(f"{url} returned {resp.status_code}", resp.status_code)
                if not last.retryable:
                    raise last
                continue
            try:
                return resp.json()
            except ValueError:
                raise ProviderError(f"{url} returned non-JSON body") from None
        assert last is not None
        raise last


class HttpChat(ChatProvider):
    name = "http-chat"

    def __init__(self, client: HttpClient, image_loader=None):
        self.client = client
        self.image_loader = image_loader  # ref -> bytes | None

    def _complete(self, req):
        images = []
        for ref in req.images:
            data = self.image_loader(ref) if self.image_loader else None
            images.append(base64.b64encode(data).decode("ascii") if data else ref)
        body = {
            "messages": [{"role": m.role, "content": m.text} for m in req.messages],
            "images": images,
            "response_format": req.contract,
        }
        data = self.client.post("chat/completions", body)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ProviderError("malformed chat completion payload") from None


class HttpEmbedder(EmbeddingProvider):
    name = "http-embedding"

    def __init__(self, client: HttpClient, dimension: int):
        self.client = client
        self.dimension = dimension

    def embed(self, text):
        if not text or not text.strip():
            raise InvalidInput("cannot embed empty text")
        data = self.client.post("embeddings", {"input": text})
        try:
            vec = np.asarray(data["data"][0]["embedding"], dtype=float)
        except (KeyError, IndexError, TypeError, ValueError):
            raise ProviderError("malformed embedding payload") from None
        if vec.shape != (self.dimension,):
            raise ProviderError(f"expected {self.dimension}-d embedding, got {vec.shape}")
        norm = np.linalg.norm(vec)
        if not np.isfinite(norm) or norm == 0:
            raise ProviderError("degenerate embedding")
        return vec / norm


class HttpASR(AsrProvider):
    def __init__(self, client: HttpClient):
        self.client = client

    def transcribe(self, audio_ref):
        if not audio_ref:
            return []
        data = self.client.post("transcribe", {"audio": str(audio_ref)})
        return [
            Utterance(u.get("speaker", "unknown"), u["text"], float(u["t0"]), float(u["t1"]))
            for u in data.get("utterances", [])
        ]


class HttpDetector(DetectorProvider):
    name = "http-detector"

    def __init__(self, client: HttpClient):
        self.client = client

    def detect(self, frame):
        image = None
        if frame.image_ref and os.path.exists(frame.image_ref):
            with open(frame.image_ref, "rb") as fh:
                image = base64.b64encode(fh.read()).decode("ascii")
        data = self.client.post("detect", {"frame": frame.ref, "image": image})
        out = []
        for det in data.get("detections", []):
            ann = Annotation(tuple(float(v) for v in det["box"]), det["label"], self.name, float(det.get("confidence", 1.0)))
            try:
                out.append(ann.validate())
            except InvalidInput as exc:
                log.warning("dropping detection on %s: %s", frame.ref, exc)
        return out


class HttpSearch(SearchProvider):
    def __init__(self, client: HttpClient):
        self.client = client

    def search(self, query):
        data = self.client.post("search", {"query": query})
        return [str(r) for r in data.get("results", [])]
