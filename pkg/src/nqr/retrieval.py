"""Candidate generation: embedding retrieval with an optional label filter.

Two modes. LR ranks accepted quotations by deep-meaning embedding similarity
and then hard-filters the top pool by label similarity; QR ranks by raw
quotation-text embeddings with no filter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backends.base import EmbeddingBackend
from .errors import NotFoundError, StageError, ValidationError
from .kb import EmbeddingStore, LabelSet, LabelStatus, Quotation

__all__ = ["RetrievalConfig", "Candidate", "label_similarity", "retrieve", "FILTER_DIMS"]

# filter dimension name -> LabelSet attribute
FILTER_DIMS = {
    "domain": "core_domains",
    "value": "core_values",
    "insight": "core_insights",
}


@dataclass(frozen=True)
class RetrievalConfig:
    top_n: int = 50
    label_threshold: float = 0.7
    mode: str = "LR"
    min_pool: int = 5
    filter_dims: tuple[str, ...] = ("domain", "value", "insight")

    def __post_init__(self):
        if self.mode not in ("LR", "QR"):
            raise ValidationError(f"mode must be LR or QR, got {self.mode!r}")
        if not 0.0 <= self.label_threshold <= 1.0:
            raise ValidationError("label_threshold must be in [0, 1]")
        if self.min_pool < 1:
            raise ValidationError("min_pool must be >= 1")
        if self.top_n < self.min_pool:
            raise ValidationError("top_n must be >= min_pool")
        if not self.filter_dims:
            raise ValidationError("filter_dims must not be empty")
        unknown = [d for d in self.filter_dims if d not in FILTER_DIMS]
        if unknown:
            raise ValidationError(f"unknown filter dims: {unknown}")


@dataclass(frozen=True)
class Candidate:
    quotation_id: str
    retrieval_similarity: float
    label_similarity: float | None
    passed_filter: bool
    backfilled: bool

    def validate(self) -> None:
        if self.label_similarity is not None:
            if not 0.0 <= self.label_similarity <= 1.0:
                raise ValidationError("label_similarity must be in [0, 1]")
        if self.backfilled and self.passed_filter:
            raise ValidationError("a backfilled candidate cannot have passed the filter")


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cannot compare a zero-norm embedding")
    return float(np.dot(a, b)) / (na * nb)


def label_similarity(
    a: LabelSet,
    b: LabelSet,
    dims: Sequence[str],
    embedder: EmbeddingBackend,
    _cache: dict | None = None,
) -> float:
    """Mean over dims of rescaled cosine between joined label strings.

    An empty dimension on either side contributes a neutral 0.5 so optional
    metadata never disqualifies a candidate by itself. The cache maps label
    strings to vectors and is shared across candidates within one retrieval.
    """
    if not dims:
        raise ValidationError("at least one label dimension is required")
    cache = _cache if _cache is not None else {}

    def vec(text: str) -> np.ndarray:
        if text not in cache:
            cache[text] = embedder.embed(text).values
        return cache[text]

    total = 0.0
    for dim in dims:
        attr = FILTER_DIMS[dim]
        ea, eb = getattr(a, attr), getattr(b, attr)
        if not ea or not eb:
            total += 0.5
            continue
        cos = _cosine(vec(", ".join(ea)), vec(", ".join(eb)))
        total += (max(-1.0, min(1.0, cos)) + 1.0) / 2.0
    return total / len(dims)


def _eligible(kb: Sequence[Quotation], mode: str) -> list[Quotation]:
    if mode == "LR":
        return [q for q in kb if q.label_status == LabelStatus.ACCEPTED]
    return [
        q
        for q in kb
        if q.label_status not in (LabelStatus.REJECTED, LabelStatus.MANUALLY_FLAGGED)
    ]


def retrieve(
    context,
    cfg: RetrievalConfig,
    kb: Sequence[Quotation],
    store: EmbeddingStore,
    embedder: EmbeddingBackend,
) -> list[Candidate]:
    """Rank the KB against a labeled context and return the candidate pool.

    LR output: candidates that passed the label filter (descending retrieval
    similarity), then any backfilled ones needed to reach min_pool. QR output:
    the plain top_n, unfiltered.
    """
    pool = _eligible(kb, cfg.mode)
    if not pool:
        raise NotFoundError("knowledge base has no quotations eligible for retrieval")

    if cfg.mode == "LR":
        if context.deep_meaning is None or context.labels is None:
            raise ValidationError("LR retrieval needs a labeled context (deep meaning + labels)")
        slot = "deep_meaning"
        query_vec = embedder.embed(context.deep_meaning).values
    else:
        slot = "quote_text"
        query_vec = embedder.embed(context.text).values

    missing = [q.id for q in pool if not store.has(q.id, slot)]
    if missing:
        raise StageError(
            f"{len(missing)} quotation(s) lack embeddings (first: {missing[0]})",
            missing_artifact=f"embedding slot {slot!r}",
        )

    ranked = sorted(
        ((_cosine(query_vec, store.get(q.id, slot).values), q) for q in pool),
        key=lambda pair: (-pair[0], pair[1].id),
    )[: cfg.top_n]

    if cfg.mode == "QR":
        return [
            Candidate(
                quotation_id=q.id,
                retrieval_similarity=sim,
                label_similarity=None,
                passed_filter=True,
                backfilled=False,
            )
            for sim, q in ranked
        ]

    cache: dict = {}
    passed: list[Candidate] = []
    failed: list[Candidate] = []
    for sim, q in ranked:
        lsim = label_similarity(context.labels, q.labels, cfg.filter_dims, embedder, cache)
        ok = lsim >= cfg.label_threshold
        cand = Candidate(
            quotation_id=q.id,
            retrieval_similarity=sim,
            label_similarity=lsim,
            passed_filter=ok,
            backfilled=False,
        )
        (passed if ok else failed).append(cand)

    need = min(cfg.min_pool, len(ranked)) - len(passed)
    backfills = [
        Candidate(
            quotation_id=c.quotation_id,
            retrieval_similarity=c.retrieval_similarity,
            label_similarity=c.label_similarity,
            passed_filter=False,
            backfilled=True,
        )
        for c in failed[:max(0, need)]
    ]
    return passed + backfills
