"""Deterministic local language model: bigram counts with add-one smoothing.

Small enough to hand-verify, yet supports everything the novelty math needs:
per-token scoring and exact next-token distributions.
"""

from __future__ import annotations

import math

from ..errors import CapacityError, ValidationError
from .base import LmBackend, NextTokenDistribution, TokenLogProbs, TokenSequence

__all__ = ["BigramLm", "split_tokens"]

_CJK_RANGES = (
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x3000, 0x303F),  # CJK punctuation
    (0xFF00, 0xFFEF),  # full-width forms
)


def _has_cjk(chunk: str) -> bool:
    return any(lo <= ord(ch) <= hi for ch in chunk for lo, hi in _CJK_RANGES)


def split_tokens(text: str) -> list[str]:
    """Whitespace tokens; chunks containing CJK characters split per character."""
    out: list[str] = []
    for chunk in text.split():
        if _has_cjk(chunk):
            out.extend(chunk)
        else:
            out.append(chunk)
    return out


class BigramLm(LmBackend):
    """Bigram model over the training corpus with Laplace (add-one) smoothing.

    p(w | v) = (count(v, w) + 1) / (count(v) + V) with V = trained types + 1
    for the unknown token. A begin-of-sequence token conditions the first
    position of each training text but is never itself scored.
    """

    name = "stub-bigram"

    def __init__(self, corpus: list[str], context_window: int = 4096):
        if not corpus:
            raise ValidationError("training corpus must be non-empty")
        self.context_window = context_window
        vocab: dict[str, int] = {}
        for text in corpus:
            for tok in split_tokens(text):
                if tok not in vocab:
                    vocab[tok] = len(vocab)
        self._vocab = vocab
        self.unk_id = len(vocab)
        self._bos_id = len(vocab) + 1  # context-only, outside the scored vocabulary
        self.vocab_size = len(vocab) + 1  # trained types + UNK
        self._bigram: dict[tuple[int, int], int] = {}
        self._context: dict[int, int] = {}
        for text in corpus:
            prev = self._bos_id
            for tok in split_tokens(text):
                tid = vocab[tok]
                key = (prev, tid)
                self._bigram[key] = self._bigram.get(key, 0) + 1
                self._context[prev] = self._context.get(prev, 0) + 1
                prev = tid

    def tokenize(self, text: str) -> TokenSequence:
        if not text:
            raise ValidationError("cannot tokenize empty text")
        texts = split_tokens(text)
        if not texts:
            raise ValidationError("text contains no tokens")
        ids = tuple(self._vocab.get(t, self.unk_id) for t in texts)
        return TokenSequence(token_ids=ids, token_texts=tuple(texts))

    def _prob(self, prev: int, nxt: int) -> float:
        num = self._bigram.get((prev, nxt), 0) + 1
        den = self._context.get(prev, 0) + self.vocab_size
        return num / den

    def score(self, prefix: TokenSequence, target: TokenSequence) -> TokenLogProbs:
        if len(target) == 0:
            raise ValidationError("target must be non-empty")
        total = len(prefix) + len(target)
        if total > self.context_window:
            raise CapacityError(
                f"sequence of {total} tokens exceeds the context window",
                limit=self.context_window,
            )
        prev = prefix.token_ids[-1] if len(prefix) else self._bos_id
        out = []
        for tid in target.token_ids:
            out.append(math.log(self._prob(prev, tid)))
            prev = tid
        return TokenLogProbs(logp=tuple(out))

    def next_distribution(self, prefix: TokenSequence) -> NextTokenDistribution:
        prev = prefix.token_ids[-1] if len(prefix) else self._bos_id
        den = self._context.get(prev, 0) + self.vocab_size
        probs = {}
        for tid in range(self.vocab_size):
            probs[tid] = (self._bigram.get((prev, tid), 0) + 1) / den
        return NextTokenDistribution(probs=probs)
