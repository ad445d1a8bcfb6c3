"""Deterministic feature-hashing embedder (offline stand-in for a text encoder)."""

from __future__ import annotations

import hashlib

import numpy as np

from ..errors import InvalidInput
from ..text import tokenize
from .base import EmbeddingProvider


def token_bucket(token: str, dimension: int) -> tuple[int, float]:
    """Bucket index and sign for one token: blake2b-64, first 4 bytes big-endian mod dim, sign from byte 4."""
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(h[:4], "big") % dimension, (1.0 if h[4] % 2 == 0 else -1.0)


class HashEmbedder(EmbeddingProvider):
    name = "hash"

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise InvalidInput("dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise InvalidInput("cannot embed empty text")
        vec = np.zeros(self.dimension)
        for tok in tokenize(text):
            idx, sign = token_bucket(tok, self.dimension)
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise InvalidInput("text has no embeddable tokens")
        return vec / norm
