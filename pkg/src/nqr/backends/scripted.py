"""Playback backends: predetermined outputs for tests, fixtures, and demos."""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np

from ..errors import (
    CapabilityError,
    CapacityError,
    NotFoundError,
    UnsupportedPromptError,
    ValidationError,
)
from ..kb import EmbeddingVector
from .base import (
    ChatBackend,
    EmbeddingBackend,
    LmBackend,
    NextTokenDistribution,
    TokenLogProbs,
    TokenSequence,
)

__all__ = [
    "classify_prompt",
    "ScriptedLm",
    "FixedEmbedder",
    "ScriptedChat",
    "CannedChat",
    "RandomAcceptChat",
]


def classify_prompt(prompt: str) -> str:
    """Identify which pipeline prompt a filled template came from.

    Detection keys on structural markers that survive templating: the output
    tags for labeling prompts, the self-correction instruction, and the YAML
    block names for the two judge prompts.
    """
    if "<LB>" in prompt or "⟨LB⟩" in prompt:
        return "labels"
    if "<AA>" in prompt or "⟨AA⟩" in prompt:
        return "analysis"
    if "self-correction" in prompt:
        return "correct"
    if "matching:" in prompt:
        return "judge_matching"
    if "novelty:" in prompt:
        return "judge_novelty"
    raise UnsupportedPromptError("prompt matches no known template shape")


class ScriptedLm(LmBackend):
    """Plays back predetermined per-token log-probs keyed by text.

    Prior scores (empty prefix) come from prior[target_text]; conditional
    scores come from cond[(prefix_text, target_text)] if present, else
    cond[target_text]. Tokens are whitespace-split. Full distributions are
    served from the optional distributions map keyed by prefix text.
    """

    name = "scripted-lm"

    def __init__(
        self,
        prior: dict | None = None,
        cond: dict | None = None,
        distributions: dict | None = None,
        context_window: int = 1_000_000,
    ):
        self.prior = dict(prior or {})
        self.cond = dict(cond or {})
        self.distributions = dict(distributions) if distributions else None
        self.context_window = context_window
        self._vocab: dict[str, int] = {}
        for key in list(self.prior) + list(self.cond):
            text = key[1] if isinstance(key, tuple) else key
            for tok in text.split():
                self._vocab.setdefault(tok, len(self._vocab))

    def tokenize(self, text: str) -> TokenSequence:
        if not text:
            raise ValidationError("cannot tokenize empty text")
        toks = text.split()
        ids = tuple(self._vocab.setdefault(t, len(self._vocab)) for t in toks)
        return TokenSequence(token_ids=ids, token_texts=tuple(toks))

    def score(self, prefix: TokenSequence, target: TokenSequence) -> TokenLogProbs:
        if len(target) == 0:
            raise ValidationError("target must be non-empty")
        if len(prefix) + len(target) > self.context_window:
            raise CapacityError(
                "sequence exceeds the scripted context window", limit=self.context_window
            )
        text = " ".join(target.token_texts)
        if len(prefix) == 0:
            table, key = self.prior, text
        else:
            ptext = " ".join(prefix.token_texts)
            table = self.cond
            key = (ptext, text) if (ptext, text) in self.cond else text
        try:
            arr = table[key]
        except KeyError:
            raise NotFoundError(f"no scripted scores for {key!r}") from None
        if len(arr) != len(target):
            raise ValidationError(
                f"scripted scores for {key!r} have length {len(arr)}, target has {len(target)}"
            )
        return TokenLogProbs(logp=tuple(float(v) for v in arr))

    def next_distribution(self, prefix: TokenSequence) -> NextTokenDistribution:
        if self.distributions is None:
            raise CapabilityError("scripted LM was built without next-token distributions")
        key = " ".join(prefix.token_texts)
        try:
            return NextTokenDistribution(probs=dict(self.distributions[key]))
        except KeyError:
            raise NotFoundError(f"no scripted distribution after {key!r}") from None


class FixedEmbedder(EmbeddingBackend):
    """Looks texts up in a fixed vector table; unknown text is an error."""

    name = "fixed-embedder"

    def __init__(self, vectors: dict):
        if not vectors:
            raise ValidationError("fixed embedder needs at least one vector")
        self._vectors = {t: np.asarray(v, dtype=np.float32) for t, v in vectors.items()}
        dims = {a.shape[0] for a in self._vectors.values()}
        if len(dims) != 1:
            raise ValidationError(f"fixed embedder vectors have mixed dimensions {sorted(dims)}")
        self.dim = dims.pop()

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValidationError("cannot embed empty text")
        try:
            arr = self._vectors[text]
        except KeyError:
            raise NotFoundError(f"no fixed embedding for {text!r}") from None
        kind = "unit" if abs(float(np.linalg.norm(arr)) - 1.0) <= 1e-4 else "raw"
        return EmbeddingVector(arr, norm_kind=kind)


class ScriptedChat(ChatBackend):
    """Returns queued responses in order and records every prompt."""

    name = "scripted-chat"

    def __init__(self, responses: list[str]):
        self._queue = list(responses)
        self.calls: list[str] = []

    def chat(self, prompt: str, temperature: float = 0.0, seed: int | None = None) -> str:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        self.calls.append(prompt)
        if not self._queue:
            raise ValidationError("scripted chat ran out of responses")
        return self._queue.pop(0)


class CannedChat(ChatBackend):
    """Serves one fixed response per prompt kind from a fixture directory.

    The directory holds files named after classify_prompt kinds, for example
    analysis.txt or judge_matching.txt.
    """

    name = "canned-chat"

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.calls: list[str] = []

    def chat(self, prompt: str, temperature: float = 0.0, seed: int | None = None) -> str:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        kind = classify_prompt(prompt)
        self.calls.append(kind)
        path = self.directory / f"{kind}.txt"
        if not path.exists():
            raise UnsupportedPromptError(f"no canned response for prompt kind {kind!r}")
        return path.read_text(encoding="utf-8")


_SIM_ANALYSIS = (
    "<AA>The line sets a concrete image against an abstract claim and lets the"
    " tension between them carry the argument.</AA>\n"
    "<DM>Expresses that what endures is shaped slowly and against resistance.</DM>"
)

_SIM_LABELS = (
    '<LB>{"core_domains": ["Life Philosophy"],'
    ' "core_insights": ["Letting steady effort accumulate"],'
    ' "applicability": ["Encouraging a discouraged friend"],'
    ' "core_values": ["Perseverance"],'
    ' "metaphors": ["River"],'
    ' "style": "Aphorism",'
    ' "sentiment_tone": ["Calm"]}</LB>'
)


class RandomAcceptChat(ChatBackend):
    """Canned labeling responses with a seeded random correction verdict.

    Used to exercise large labeling runs: each correction round accepts with
    probability accept_prob, independently.
    """

    name = "random-accept-chat"

    def __init__(self, accept_prob: float, seed: int, rejection_note: str = "The analysis stays superficial."):
        if not 0.0 <= accept_prob <= 1.0:
            raise ValidationError("accept_prob must be in [0, 1]")
        self.accept_prob = accept_prob
        self.rejection_note = rejection_note
        self._rng = random.Random(seed)

    def chat(self, prompt: str, temperature: float = 0.0, seed: int | None = None) -> str:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        kind = classify_prompt(prompt)
        if kind == "analysis":
            return _SIM_ANALYSIS
        if kind == "correct":
            if self._rng.random() < self.accept_prob:
                return "Yes"
            return "No. " + self.rejection_note
        if kind == "labels":
            return _SIM_LABELS
        raise UnsupportedPromptError(f"random-accept chat does not handle {kind!r} prompts")
