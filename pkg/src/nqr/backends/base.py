"""Backend interfaces for token-scoring LMs, embedders, chat models, and search.

Every interface has a deterministic local implementation so the full pipeline
runs offline; remote implementations speak a small HTTP JSON protocol.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..errors import ValidationError
from ..kb import EmbeddingVector

__all__ = [
    "TokenSequence",
    "TokenLogProbs",
    "NextTokenDistribution",
    "LmBackend",
    "EmbeddingBackend",
    "ChatBackend",
    "SearchBackend",
]

_DIST_SUM_TOL = 1e-6


@dataclass(frozen=True)
class TokenSequence:
    """Parallel token ids and display texts for one string."""

    token_ids: tuple[int, ...]
    token_texts: tuple[str, ...]

    def __post_init__(self):
        if len(self.token_ids) != len(self.token_texts):
            raise ValidationError("token_ids and token_texts must have equal length")
        if any(i < 0 for i in self.token_ids):
            raise ValidationError("token ids must be non-negative")

    def __len__(self) -> int:
        return len(self.token_ids)


@dataclass(frozen=True)
class TokenLogProbs:
    """Natural-log probabilities, one per scored token."""

    logp: tuple[float, ...]

    def __post_init__(self):
        for v in self.logp:
            if not math.isfinite(v) or v > 0.0:
                raise ValidationError(f"log-probability {v!r} must be finite and <= 0")

    def __len__(self) -> int:
        return len(self.logp)


@dataclass(frozen=True)
class NextTokenDistribution:
    """Full next-token distribution as a token_id -> probability map."""

    probs: dict[int, float]

    def validate(self) -> None:
        total = 0.0
        for tid, p in self.probs.items():
            if p <= 0.0:
                raise ValidationError(f"distribution entry for token {tid} must be > 0")
            total += p
        if abs(total - 1.0) > _DIST_SUM_TOL:
            raise ValidationError(f"distribution sums to {total!r}, expected 1")


class LmBackend(ABC):
    """Token-scoring language model."""

    name: str = "lm"
    context_window: int = 4096

    @abstractmethod
    def tokenize(self, text: str) -> TokenSequence:
        """Split text into tokens; deterministic for a fixed backend."""

    @abstractmethod
    def score(self, prefix: TokenSequence, target: TokenSequence) -> TokenLogProbs:
        """Log-prob of each target token given prefix plus preceding target tokens.

        An empty prefix yields unconditional (prior) scores.
        """

    @abstractmethod
    def next_distribution(self, prefix: TokenSequence) -> NextTokenDistribution:
        """Full distribution over the vocabulary after prefix.

        Backends without distribution access raise CapabilityError.
        """


class EmbeddingBackend(ABC):
    """Text to unit-normalized vector of a backend-declared dimension."""

    name: str = "embedder"
    dim: int = 0

    @abstractmethod
    def embed(self, text: str) -> EmbeddingVector:
        ...


class ChatBackend(ABC):
    """Instruction-following chat model used by the label agent and judges."""

    name: str = "chat"

    @abstractmethod
    def chat(self, prompt: str, temperature: float = 0.0, seed: int | None = None) -> str:
        ...


class SearchBackend(ABC):
    """Web search result counts for popularity estimation."""

    name: str = "search"

    @abstractmethod
    def count(self, phrase: str, engine: str) -> int:
        ...
