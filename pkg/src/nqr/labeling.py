"""Generative label agent.

Four stages per quotation: in-depth analysis, deep-meaning summary,
multi-round self-correction, and structured label extraction. Contexts get
the same treatment online minus the correction loop.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .backends.base import ChatBackend
from .errors import ExtractionError, ValidationError
from .kb import (
    ContextRecord,
    LabelSet,
    LabelStatus,
    Language,
    Quotation,
    deep_meaning_length_ok,
)

__all__ = ["LabelRunReport", "LabelAgent", "REJECTION_REASONS", "extract_tag", "parse_label_json"]

logger = logging.getLogger(__name__)

REJECTION_REASONS = ("superficiality", "over_interpretation", "logical_conflict")

_DEFAULT_PROMPT_DIR = Path(__file__).parent / "prompts"

# extraction tolerates both ASCII tags and the typographic angle brackets
# some chat models echo back
_TAG_BRACKETS = (("<", ">"), ("⟨", "⟩"))


def extract_tag(response: str, tag: str) -> str | None:
    """Pull the text between <TAG>...</TAG>, or None when absent."""
    for lo, hi in _TAG_BRACKETS:
        pattern = re.escape(f"{lo}{tag}{hi}") + r"(.*?)" + re.escape(f"{lo}/{tag}{hi}")
        m = re.search(pattern, response, flags=re.DOTALL)
        if m:
            return m.group(1).strip()
    return None


def _fill(template: str, values: dict[str, str]) -> str:
    # plain replacement: templates contain literal JSON braces, so str.format
    # is off the table
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out


def parse_label_json(obj: dict) -> LabelSet:
    """Convert the labeling prompt's JSON shape into a LabelSet."""
    if not isinstance(obj, dict):
        raise ValidationError("label payload must be a JSON object")

    def seq(key):
        v = obj.get(key, [])
        if isinstance(v, str):
            v = [v]
        return tuple(str(x).strip() for x in v if str(x).strip())

    metaphors = obj.get("metaphors")
    if isinstance(metaphors, list):
        metaphors = metaphors[0] if metaphors else None
    style = obj.get("style")
    if isinstance(style, list):
        style = style[0] if style else None
    labels = LabelSet(
        core_domains=seq("core_domains"),
        core_insights=seq("core_insights"),
        core_values=seq("core_values"),
        applicability=seq("applicability"),
        sentiment_tone=seq("sentiment_tone"),
        metaphors=str(metaphors).strip() if metaphors else None,
        style=str(style).strip() if style else None,
    )
    labels.validate()
    return labels


def _deep_meaning_ok(dm: str, language: Language) -> bool:
    if not (dm.startswith("Express") or dm.startswith("表达")):
        return False
    return deep_meaning_length_ok(dm, language)


@dataclass(frozen=True)
class LabelRunReport:
    """Bookkeeping for one quotation's trip through the agent."""

    quotation_id: str
    rounds_used: int
    outcome: str  # "accepted" | "rejected"
    rejection_reasons: tuple[str, ...]
    raw_responses: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "quotation_id": self.quotation_id,
            "rounds_used": self.rounds_used,
            "outcome": self.outcome,
            "rejection_reasons": list(self.rejection_reasons),
            "raw_responses": list(self.raw_responses),
        }


def _reasons_from_critiques(critiques: list[str]) -> tuple[str, ...]:
    found = []
    text = " ".join(critiques).lower()
    if "superficial" in text or "shallow" in text:
        found.append("superficiality")
    if "over-interpret" in text or "overinterpret" in text or "unsupported" in text:
        found.append("over_interpretation")
    if "logic" in text or "inconsisten" in text or "gap" in text:
        found.append("logical_conflict")
    # a bare "No" gives nothing to parse; flag everything for the manual audit
    return tuple(found) if found else REJECTION_REASONS


class LabelAgent:
    """Drives the chat backend through the labeling protocol."""

    def __init__(
        self,
        chat: ChatBackend,
        prompt_dir: str | Path | None = None,
        max_rounds: int = 3,
        run_log: str | Path | None = None,
    ):
        if max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")
        self.chat = chat
        self.max_rounds = max_rounds
        self.run_log = Path(run_log) if run_log else None
        prompt_dir = Path(prompt_dir) if prompt_dir else _DEFAULT_PROMPT_DIR
        self._templates = {
            name: (prompt_dir / f"{name}.txt").read_text(encoding="utf-8")
            for name in ("analysis", "correct", "labels")
        }

    # -- stage 1+2: analysis and deep meaning --

    def _analysis_prompt(self, q: Quotation, critique: str | None = None) -> str:
        prompt = _fill(
            self._templates["analysis"],
            {"quote": q.text, "author": q.author or "Unknown", "info": q.source_info or "None"},
        )
        if critique:
            prompt += f"\nKnown issues to fix:\n{critique}\n"
        return prompt

    def analyze_and_deep_meaning(
        self, q: Quotation, critique: str | None = None, _sink: list | None = None
    ) -> tuple[str, str]:
        if not q.text:
            raise ValidationError("quotation text must be non-empty")
        prompt = self._analysis_prompt(q, critique)
        analysis = dm = None
        length_retry_done = False
        attempts = 0
        while attempts < 3:
            attempts += 1
            response = self.chat.chat(prompt)
            if _sink is not None:
                _sink.append(response)
            analysis = extract_tag(response, "AA")
            dm = extract_tag(response, "DM")
            if analysis is None or dm is None:
                continue  # malformed; re-prompt (two retries at most)
            if not _deep_meaning_ok(dm, q.language):
                if length_retry_done:
                    raise ValidationError(
                        f"quotation {q.id!r}: deep meaning violates the length/template rule after re-prompt"
                    )
                length_retry_done = True
                attempts -= 1  # the length re-prompt is separate from tag retries
                continue
            return analysis, dm
        raise ExtractionError(
            f"quotation {q.id!r}: response lacked <AA>/<DM> tags after {attempts} attempts"
        )

    # -- stage 3: correction loop --

    def correct(
        self, q: Quotation, analysis: str, deep_meaning: str, max_rounds: int | None = None
    ) -> tuple[LabelRunReport, str, str]:
        max_rounds = max_rounds if max_rounds is not None else self.max_rounds
        if max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")
        raw: list[str] = []
        critiques: list[str] = []
        for round_no in range(1, max_rounds + 1):
            prompt = _fill(
                self._templates["correct"],
                {"quote": q.text, "analysis": analysis, "deep_meaning": deep_meaning},
            )
            verdict = self.chat.chat(prompt)
            raw.append(verdict)
            if verdict.strip().lower().startswith("yes"):
                report = LabelRunReport(
                    quotation_id=q.id,
                    rounds_used=round_no,
                    outcome="accepted",
                    rejection_reasons=(),
                    raw_responses=tuple(raw),
                )
                return report, analysis, deep_meaning
            critiques.append(verdict)
            if round_no < max_rounds:
                analysis, deep_meaning = self.analyze_and_deep_meaning(
                    q, critique=verdict, _sink=raw
                )
        report = LabelRunReport(
            quotation_id=q.id,
            rounds_used=max_rounds,
            outcome="rejected",
            rejection_reasons=_reasons_from_critiques(critiques),
            raw_responses=tuple(raw),
        )
        return report, analysis, deep_meaning

    # -- stage 4: structured labels --

    def extract_labels(self, q: Quotation, deep_meaning: str) -> LabelSet:
        if not deep_meaning:
            raise ValidationError("deep meaning is required before labeling")
        prompt = _fill(
            self._templates["labels"],
            {
                "quote": q.text,
                "author": q.author or "Unknown",
                "info": q.source_info or "None",
                "deep_meaning": deep_meaning,
            },
        )
        cardinality_retry_done = False
        attempts = 0
        while attempts < 3:
            attempts += 1
            response = self.chat.chat(prompt)
            body = extract_tag(response, "LB")
            if body is None:
                continue
            try:
                obj = json.loads(body)
            except json.JSONDecodeError:
                continue
            try:
                return parse_label_json(obj)
            except ValidationError:
                if cardinality_retry_done:
                    raise
                cardinality_retry_done = True
                attempts -= 1
                continue
        raise ExtractionError(
            f"quotation {q.id!r}: no parseable <LB> JSON after {attempts} attempts"
        )

    # -- composed flows --

    def label_quotation(self, q: Quotation) -> tuple[Quotation, LabelRunReport]:
        sink: list[str] = []
        analysis, dm = self.analyze_and_deep_meaning(q, _sink=sink)
        report, analysis, dm = self.correct(q, analysis, dm)
        report = replace(report, raw_responses=tuple(sink) + report.raw_responses)
        if report.outcome == "accepted":
            labels = self.extract_labels(q, dm)
            updated = q.with_labeling(analysis, dm, labels, LabelStatus.ACCEPTED)
        else:
            updated = q.with_labeling(analysis, dm, None, LabelStatus.REJECTED)
        self._log(report)
        return updated, report

    def label_kb(
        self, records: list[Quotation], skip_labeled: bool = True
    ) -> tuple[list[Quotation], list[LabelRunReport]]:
        out: list[Quotation] = []
        reports: list[LabelRunReport] = []
        for q in records:
            if skip_labeled and q.label_status != LabelStatus.UNLABELED:
                out.append(q)
                continue
            updated, report = self.label_quotation(q)
            out.append(updated)
            reports.append(report)
        return out, reports

    def label_context(self, c: ContextRecord) -> ContextRecord:
        """Online labeling for a user context: no correction loop."""
        if not c.text:
            raise ValidationError("context text must be non-empty")
        has_cjk = any("一" <= ch <= "鿿" for ch in c.text)
        pseudo = Quotation(
            id=c.id or "context",
            text=c.text,
            language=Language.ZH if has_cjk else Language.EN,
            source_info="User-provided context passage",
        )
        _, dm = self.analyze_and_deep_meaning(pseudo)
        labels = self.extract_labels(pseudo, dm)
        return replace(c, deep_meaning=dm, labels=labels)

    def _log(self, report: LabelRunReport) -> None:
        if self.run_log is None:
            return
        entry = report.to_json()
        entry["logged_at"] = datetime.now(timezone.utc).isoformat()
        with self.run_log.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
