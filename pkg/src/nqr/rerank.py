"""Score fusion: popularity, semantic match, and the final weighted ranking."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .backends.base import LmBackend, TokenSequence
from .errors import ValidationError
from .kb import EmbeddingStore, EmbeddingVector, Quotation
from .novelty import PriorTrace, TokenTrace, complete_trace, novelty_token_score

__all__ = [
    "RerankWeights",
    "PopularityParams",
    "RerankResult",
    "popularity_score",
    "match_score",
    "fuse",
    "rerank",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RerankWeights:
    lambda_n: float = 0.70
    lambda_p: float = 0.20
    lambda_m: float = 0.10

    def __post_init__(self):
        if self.lambda_n < 0 or self.lambda_p < 0 or self.lambda_m < 0:
            raise ValidationError("weights must be non-negative")
        if self.lambda_n == self.lambda_p == self.lambda_m == 0:
            raise ValidationError("at least one weight must be positive")


@dataclass(frozen=True)
class PopularityParams:
    mu: float = 10.53
    sigma: float = 2.21

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")


@dataclass(frozen=True)
class RerankResult:
    quotation_id: str
    s_n: float
    s_p: float
    s_m: float
    s_final: float
    rank: int
    trace: TokenTrace


def popularity_score(c: int, params: PopularityParams = PopularityParams()) -> float:
    """Squash a web result count into (0, 1) via a log-domain sigmoid."""
    if c < 0:
        raise ValidationError("popularity count must be non-negative")
    z = (math.log1p(c) - params.mu) / params.sigma
    return 1.0 / (1.0 + math.exp(-z))


def match_score(h_q: EmbeddingVector, h_c: EmbeddingVector) -> float:
    """Cosine similarity of the two embeddings rescaled to [0, 1]."""
    a, b = h_q.values, h_c.values
    if a.shape != b.shape:
        raise ValidationError(f"embedding dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cannot match against a zero-norm embedding")
    cos = float(np.dot(a, b)) / (na * nb)
    cos = max(-1.0, min(1.0, cos))
    return (cos + 1.0) / 2.0


def fuse(s_n: float, s_p: float, s_m: float, weights: RerankWeights) -> float:
    return weights.lambda_n * s_n + weights.lambda_p * s_p + weights.lambda_m * s_m


def rerank(
    candidate_ids: Sequence[str],
    context_text: str,
    context_vec: EmbeddingVector,
    kb: Mapping[str, Quotation],
    lm: LmBackend,
    store: EmbeddingStore,
    weights: RerankWeights = RerankWeights(),
    pop_params: PopularityParams = PopularityParams(),
    match_slot: str = "deep_meaning",
    prior_traces: Mapping[str, PriorTrace] | None = None,
) -> list[RerankResult]:
    """Score every candidate and return them ranked by the fused score.

    A candidate with a precomputed prior trace only needs the conditional
    scoring pass; missing popularity counts degrade to a neutral 0.5 with a
    warning rather than failing the ranking.
    """
    if not candidate_ids:
        raise ValidationError("no candidates to rerank")
    ctx_tokens = lm.tokenize(context_text) if context_text.strip() else TokenSequence((), ())
    scored = []
    for qid in candidate_ids:
        quote = kb[qid]
        prior = prior_traces.get(qid) if prior_traces else None
        if prior is not None:
            trace = complete_trace(prior, lm.score(ctx_tokens, prior.tokens).logp)
        else:
            trace = novelty_token_score(context_text, quote.text, lm)
        if quote.popularity_count is None:
            logger.warning("no popularity count for %s; using neutral 0.5", qid)
            s_p = 0.5
        else:
            s_p = popularity_score(quote.popularity_count, pop_params)
        s_m = match_score(store.get(qid, match_slot), context_vec)
        scored.append((qid, trace.s_n, s_p, s_m, fuse(trace.s_n, s_p, s_m, weights), trace))
    scored.sort(key=lambda row: (-row[4], row[0]))
    return [
        RerankResult(
            quotation_id=qid, s_n=s_n, s_p=s_p, s_m=s_m, s_final=s_final, rank=i + 1, trace=trace
        )
        for i, (qid, s_n, s_p, s_m, s_final, trace) in enumerate(scored)
    ]
