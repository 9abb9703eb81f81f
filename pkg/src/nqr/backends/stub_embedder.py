"""Deterministic local embedder: signed feature hashing of character trigrams."""

from __future__ import annotations

import zlib

import numpy as np

from ..errors import ValidationError
from ..kb import EmbeddingVector
from .base import EmbeddingBackend

__all__ = ["HashingEmbedder"]


class HashingEmbedder(EmbeddingBackend):
    """Hash character trigrams of "^text$" into D signed buckets, L2-normalize.

    crc32 keeps the hash stable across processes, which Python's builtin
    string hash is not.
    """

    name = "stub-trigram"

    def __init__(self, dim: int = 256):
        if dim <= 0:
            raise ValidationError("embedder dimension must be positive")
        self.dim = dim

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValidationError("cannot embed empty text")
        padded = f"^{text}$"
        vec = np.zeros(self.dim, dtype=np.float64)
        for i in range(len(padded) - 2):
            h = zlib.crc32(padded[i : i + 3].encode("utf-8"))
            sign = 1.0 if (h >> 31) & 1 == 0 else -1.0
            vec[h % self.dim] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # trigram signs cancelled exactly; fall back to a single stable bucket
            vec[zlib.crc32(padded.encode("utf-8")) % self.dim] = 1.0
            norm = 1.0
        return EmbeddingVector((vec / norm).astype(np.float32), norm_kind="unit")
