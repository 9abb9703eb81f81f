"""Rule-based chat backend so labeling and judging run fully offline.

Responses are derived from the prompt payload by stable hashing: the same
quote always gets the same analysis, labels, and judge scores, across runs
and platforms. No linguistic quality is intended, only schema-valid and
deterministic output.
"""

from __future__ import annotations

import json
import string
import zlib

from ..errors import UnsupportedPromptError, ValidationError
from .base import ChatBackend
from .scripted import classify_prompt

__all__ = ["LocalChat"]

_DOMAINS = [
    "Life Philosophy",
    "Knowledge & Learning",
    "Success & Achievement",
    "Love & Family",
    "Separation & Longing",
    "Spiritual Solace",
    "Politics & War",
]

_INSIGHTS = [
    "Letting steady effort accumulate",
    "Accepting change without fear",
    "Choosing depth over display",
    "Turning loss into understanding",
    "Acting before conditions feel ready",
    "Keeping judgment independent of the crowd",
    "Finding scale in small things",
    "Holding attention on what is present",
]

_VALUES = [
    "Perseverance",
    "Humility",
    "Courage",
    "Honesty",
    "Curiosity",
    "Compassion",
    "Patience",
]

_APPLICABILITY = [
    "Opening a reflective essay",
    "Encouraging a discouraged friend",
    "Closing a commencement speech",
    "Annotating a reading journal",
]

_TONES = [
    "Calm",
    "Resolute",
    "Wistful",
    "Hopeful",
    "Sober",
    "Playful",
]

_STYLES = ["Aphorism", "Metaphor", "Parallelism", "Imagery", "Antithesis"]

_THEMES = [
    "what endures is shaped slowly and against resistance",
    "attention gives ordinary moments their weight",
    "growth asks for discomfort before it gives direction",
    "worth is measured by use rather than by praise",
    "distance clarifies what nearness obscures",
    "beginnings matter less than the refusal to stop",
    "the world answers the questions we dare to ask",
    "quiet constancy outlasts loud intention",
]


def _between(text: str, start_marker: str, end_markers: set[str]) -> str:
    """Return the lines between a marker line and the next end marker."""
    lines = text.splitlines()
    start = None
    for i, line in enumerate(lines):
        if line.strip() == start_marker:
            start = i
    if start is None:
        return ""
    out = []
    for line in lines[start + 1 :]:
        if line.strip() in end_markers:
            break
        out.append(line)
    return "\n".join(out).strip()


def _quoted_field(text: str, label: str) -> str:
    """Extract the value of a `Label: "..."` line."""
    for line in text.splitlines():
        s = line.strip()
        if s.startswith(label):
            v = s[len(label) :].strip()
            return v.strip('"')
    return ""


def _keywords(payload: str, n: int = 2) -> list[str]:
    words = []
    for w in payload.split():
        w = w.strip(string.punctuation + "“”‘’")
        if len(w) >= 4 and w.isalpha() and w.lower() not in ("that", "with", "this", "from"):
            words.append(w.lower())
    if not words and payload:
        # no alphabetic words (e.g. Chinese text): fall back to characters
        chars = [c for c in payload if not c.isspace()]
        words = ["".join(chars[:2])] if chars else []
    seen: list[str] = []
    for w in words:
        if w not in seen:
            seen.append(w)
    return seen[:n]


def _pick(options: list[str], h: int, salt: int) -> str:
    return options[(h >> salt) % len(options)]


class LocalChat(ChatBackend):
    name = "local-chat"

    def chat(self, prompt: str, temperature: float = 0.0, seed: int | None = None) -> str:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        kind = classify_prompt(prompt)
        if kind == "analysis":
            return self._analysis(prompt)
        if kind == "correct":
            return "Yes"
        if kind == "labels":
            return self._labels(prompt)
        if kind in ("judge_matching", "judge_novelty"):
            return self._judge(prompt, kind)
        raise UnsupportedPromptError(f"local chat does not handle {kind!r} prompts")

    def _analysis(self, prompt: str) -> str:
        payload = _between(prompt, "Quote to Analyze:", {"Author:"}) or prompt
        h = zlib.crc32(payload.encode("utf-8"))
        theme = _pick(_THEMES, h, 0)
        tone = _pick(_TONES, h, 3)
        kws = _keywords(payload)
        focus = " and ".join(kws) if kws else "its central image"
        aa = (
            f"The line centers on {focus}. It sets a concrete image against an abstract claim,"
            f" and the overall tone is {tone.lower()}."
            f" Read closely, it argues that {theme}."
        )
        dm = f"Expresses that {theme}."
        return f"<AA>{aa}</AA>\n<DM>{dm}</DM>"

    def _labels(self, prompt: str) -> str:
        payload = _between(prompt, "Quote:", {"Author:"}) or prompt
        h = zlib.crc32(payload.encode("utf-8"))
        kws = _keywords(payload, n=1)
        labels = {
            "core_domains": [_pick(_DOMAINS, h, 0)],
            "core_insights": [_pick(_INSIGHTS, h, 2), _pick(_INSIGHTS, h ^ 0x5A5A, 5)][
                : 1 + (h >> 7) % 2
            ],
            "applicability": [_pick(_APPLICABILITY, h, 4)] if (h >> 9) % 3 else [],
            "core_values": [_pick(_VALUES, h, 6)],
            "metaphors": [kws[0].capitalize()] if kws else [],
            "style": _pick(_STYLES, h, 8),
            "sentiment_tone": [_pick(_TONES, h, 10)],
        }
        # a hash collision between the two insight picks would break cardinality
        labels["core_insights"] = list(dict.fromkeys(labels["core_insights"]))
        return "<LB>" + json.dumps(labels, ensure_ascii=False) + "</LB>"

    def _judge(self, prompt: str, kind: str) -> str:
        block = "matching" if kind == "judge_matching" else "novelty"
        quote = _quoted_field(prompt.rsplit("---INPUT---", 1)[-1], "Quote:")
        h = zlib.crc32((block + quote).encode("utf-8"))
        score = 1 + h % 5
        reason = f"Deterministic local rating of the quote for {block}."
        return f"{block}:\n  reason: {reason}\n  score: {score}\n"
