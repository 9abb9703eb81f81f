"""Token-level novelty scoring.

The estimator runs two scoring passes over the same quote tokens: a prior
pass with no prefix and a conditional pass with the context as prefix. The
prior pass yields a self-perplexity curve whose second-order changes locate
the tokens where the quote turns; those positions get the weight when
averaging the per-token log-probability differences.

The prior half is context-independent, so it can be computed once per quote
and stored; the online request only adds the conditional pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends.base import LmBackend, TokenSequence
from .backends.stub_lm import split_tokens
from .errors import ValidationError

__all__ = [
    "EPSILON",
    "TokenTrace",
    "PriorTrace",
    "trace_from_logprobs",
    "prior_trace_from_logp",
    "prior_pass",
    "complete_trace",
    "novelty_token_score",
    "surprisal_score",
    "kl_score",
    "embedding_distance_score",
    "self_bleu_score",
    "uniform_avg_score",
    "topk_avg_score",
]

# Keeps the min-max normalization finite when max == min; value is far below
# any meaningful perplexity change.
EPSILON = 1e-8

_EMPTY = TokenSequence((), ())


@dataclass(frozen=True)
class PriorTrace:
    """Context-independent half of a token trace; cacheable per quotation."""

    tokens: TokenSequence
    logp_prior: tuple[float, ...]
    ppl: tuple[float, ...]
    delta1: tuple[float, ...]
    delta2_abs: tuple[float, ...]
    big_delta2: tuple[float, ...]
    w: tuple[float, ...]
    w_tilde: tuple[float, ...]


@dataclass(frozen=True)
class TokenTrace:
    """Full per-token scoring record for one (context, quote) pair."""

    tokens: TokenSequence
    logp_prior: tuple[float, ...]
    logp_cond: tuple[float, ...]
    ppl: tuple[float, ...]
    delta1: tuple[float, ...]
    delta2_abs: tuple[float, ...]
    big_delta2: tuple[float, ...]
    w: tuple[float, ...]
    w_tilde: tuple[float, ...]
    r: tuple[float, ...]
    s_n: float

    def validate(self) -> None:
        T = len(self.tokens)
        if T < 1:
            raise ValidationError("trace needs at least one token")
        for name in ("logp_prior", "logp_cond", "ppl", "delta1", "delta2_abs", "big_delta2", "w", "w_tilde", "r"):
            if len(getattr(self, name)) != T:
                raise ValidationError(f"trace field {name} has wrong length")
        if self.delta1[0] != 0.0 or self.delta2_abs[0] != 0.0:
            raise ValidationError("first-position differences must be padded to zero")
        if abs(sum(self.w_tilde) - 1.0) > 1e-9:
            raise ValidationError("w_tilde must sum to 1")

    def to_json(self) -> dict:
        return {
            "token_texts": list(self.tokens.token_texts),
            "logp_prior": list(self.logp_prior),
            "logp_cond": list(self.logp_cond),
            "ppl": list(self.ppl),
            "delta1": list(self.delta1),
            "delta2_abs": list(self.delta2_abs),
            "big_delta2": list(self.big_delta2),
            "w": list(self.w),
            "w_tilde": list(self.w_tilde),
            "r": list(self.r),
            "s_n": self.s_n,
        }


def _prior_arrays(logp_prior: np.ndarray) -> dict[str, np.ndarray]:
    T = logp_prior.shape[0]
    ppl = np.exp(-logp_prior)
    delta1 = np.zeros(T)
    delta1[1:] = ppl[1:] - ppl[:-1]
    delta2_abs = np.zeros(T)
    delta2_abs[1:] = np.abs(delta1[1:] - delta1[:-1])
    big_delta2 = np.log1p(delta2_abs)
    mn = float(big_delta2.min())
    mx = float(big_delta2.max())
    if mx > mn:
        w = (big_delta2 - mn) / (mx - mn + EPSILON)
        w_tilde = w / w.sum()
    else:
        # constant curvature (e.g. T <= 2): no position stands out,
        # degrade to a uniform average
        w = np.zeros(T)
        w_tilde = np.full(T, 1.0 / T)
    return {
        "ppl": ppl,
        "delta1": delta1,
        "delta2_abs": delta2_abs,
        "big_delta2": big_delta2,
        "w": w,
        "w_tilde": w_tilde,
    }


def prior_trace_from_logp(tokens: TokenSequence, logp_prior) -> PriorTrace:
    logp = np.asarray(logp_prior, dtype=np.float64)
    if logp.shape[0] != len(tokens) or len(tokens) < 1:
        raise ValidationError("logp_prior length must match the non-empty token sequence")
    a = _prior_arrays(logp)
    return PriorTrace(
        tokens=tokens,
        logp_prior=tuple(logp.tolist()),
        ppl=tuple(a["ppl"].tolist()),
        delta1=tuple(a["delta1"].tolist()),
        delta2_abs=tuple(a["delta2_abs"].tolist()),
        big_delta2=tuple(a["big_delta2"].tolist()),
        w=tuple(a["w"].tolist()),
        w_tilde=tuple(a["w_tilde"].tolist()),
    )


def complete_trace(prior: PriorTrace, logp_cond) -> TokenTrace:
    cond = np.asarray(logp_cond, dtype=np.float64)
    if cond.shape[0] != len(prior.tokens):
        raise ValidationError("logp_cond length must match the prior trace")
    r = np.asarray(prior.logp_prior) - cond
    w_tilde = np.asarray(prior.w_tilde)
    return TokenTrace(
        tokens=prior.tokens,
        logp_prior=prior.logp_prior,
        logp_cond=tuple(cond.tolist()),
        ppl=prior.ppl,
        delta1=prior.delta1,
        delta2_abs=prior.delta2_abs,
        big_delta2=prior.big_delta2,
        w=prior.w,
        w_tilde=prior.w_tilde,
        r=tuple(r.tolist()),
        s_n=float(w_tilde @ r),
    )


def trace_from_logprobs(tokens: TokenSequence, logp_prior, logp_cond) -> TokenTrace:
    """Pure form of the estimator: all model scores supplied by the caller."""
    return complete_trace(prior_trace_from_logp(tokens, logp_prior), logp_cond)


def _context_tokens(context: str, lm: LmBackend) -> TokenSequence:
    if not context or not context.strip():
        return _EMPTY
    return lm.tokenize(context)


def prior_pass(quote: str, lm: LmBackend) -> PriorTrace:
    if not quote:
        raise ValidationError("quote must be non-empty")
    tokens = lm.tokenize(quote)
    logp = lm.score(_EMPTY, tokens).logp
    return prior_trace_from_logp(tokens, logp)


def novelty_token_score(context: str, quote: str, lm: LmBackend) -> TokenTrace:
    prior = prior_pass(quote, lm)
    cond = lm.score(_context_tokens(context, lm), prior.tokens).logp
    return complete_trace(prior, cond)


# ---------------------------------------------------------------------------
# Baseline estimators


def _r_values(context: str, quote: str, lm: LmBackend) -> np.ndarray:
    if not quote:
        raise ValidationError("quote must be non-empty")
    tokens = lm.tokenize(quote)
    prior = np.asarray(lm.score(_EMPTY, tokens).logp)
    cond = np.asarray(lm.score(_context_tokens(context, lm), tokens).logp)
    return prior - cond


def surprisal_score(context: str, quote: str, lm: LmBackend) -> float:
    """Mean conditional surprisal: high when the quote is unlikely given the context."""
    if not quote:
        raise ValidationError("quote must be non-empty")
    tokens = lm.tokenize(quote)
    cond = np.asarray(lm.score(_context_tokens(context, lm), tokens).logp)
    return float(np.mean(-cond))


def _slice(ts: TokenSequence, end: int) -> TokenSequence:
    return TokenSequence(ts.token_ids[:end], ts.token_texts[:end])


def _concat(a: TokenSequence, b: TokenSequence) -> TokenSequence:
    return TokenSequence(a.token_ids + b.token_ids, a.token_texts + b.token_texts)


def kl_score(context: str, quote: str, lm: LmBackend) -> float:
    """Mean per-position KL divergence between prior and conditional next-token
    distributions. Needs a backend that exposes full distributions."""
    if not quote:
        raise ValidationError("quote must be non-empty")
    tokens = lm.tokenize(quote)
    ctx = _context_tokens(context, lm)
    total = 0.0
    for t in range(len(tokens)):
        prior = lm.next_distribution(_slice(tokens, t))
        cond = lm.next_distribution(_concat(ctx, _slice(tokens, t)))
        kl = 0.0
        for tid, p in prior.probs.items():
            q = cond.probs.get(tid)
            if q is None:
                raise ValidationError(
                    f"conditional distribution lacks support for token {tid}"
                )
            kl += p * np.log(p / q)
        total += kl
    return float(total / len(tokens))


def _cosines(quote: str, kb_texts, embedder) -> np.ndarray:
    if not kb_texts:
        raise ValidationError("reference corpus must be non-empty")
    qv = embedder.embed(quote).values
    return np.array([float(np.dot(qv, embedder.embed(t).values)) for t in kb_texts])


def embedding_distance_score(quote: str, kb_texts, embedder, k: int = 5) -> float:
    """Mean embedding distance to the k nearest reference texts (k clamped)."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    dist = 1.0 - _cosines(quote, kb_texts, embedder)
    k = min(k, dist.shape[0])
    return float(np.mean(np.sort(dist)[:k]))


def _ngram_counts(toks: list[str], n: int) -> dict[tuple, int]:
    counts: dict[tuple, int] = {}
    for i in range(len(toks) - n + 1):
        g = tuple(toks[i : i + n])
        counts[g] = counts.get(g, 0) + 1
    return counts


def _bleu4(candidate: list[str], reference: list[str]) -> float:
    log_p = 0.0
    for n in range(1, 5):
        cand = _ngram_counts(candidate, n)
        ref = _ngram_counts(reference, n)
        total = sum(cand.values())
        if total == 0:
            continue  # too short for this order; neutral (log 1)
        matched = sum(min(c, ref.get(g, 0)) for g, c in cand.items())
        log_p += 0.25 * np.log((matched + 1) / (total + 1))  # add-one smoothing
    c, r = len(candidate), len(reference)
    bp = 1.0 if c > r else float(np.exp(1.0 - r / max(c, 1)))
    return float(bp * np.exp(log_p))


def self_bleu_score(quote: str, kb_texts, embedder) -> float:
    """1 - BLEU-4 against the embedding-nearest reference text.

    High when even the closest reference shares little surface form with
    the quote.
    """
    cos = _cosines(quote, kb_texts, embedder)
    nearest = kb_texts[int(np.argmax(cos))]
    return 1.0 - _bleu4(split_tokens(quote), split_tokens(nearest))


def uniform_avg_score(context: str, quote: str, lm: LmBackend) -> float:
    """Unweighted mean of the per-token log-probability differences."""
    return float(np.mean(_r_values(context, quote, lm)))


def topk_avg_score(context: str, quote: str, lm: LmBackend, k: int = 5) -> float:
    """Mean of the first k per-token differences (k clamped to the length)."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    r = _r_values(context, quote, lm)
    k = min(k, r.shape[0])
    return float(np.mean(r[:k]))
