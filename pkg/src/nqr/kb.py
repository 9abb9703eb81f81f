"""Knowledge-base domain types and persistence.

A KB is a JSON Lines file with one quotation per line, plus an optional
binary sidecar holding embedding vectors keyed by (id, slot).
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import IntegrityError, NotFoundError, ParseError, ValidationError

__all__ = [
    "Language",
    "LabelStatus",
    "LabelSet",
    "Quotation",
    "ContextRecord",
    "EmbeddingVector",
    "EmbeddingStore",
    "EMBEDDING_SLOTS",
    "deep_meaning_length_ok",
    "load_kb",
    "save_kb",
    "load_contexts",
]


class Language(str, Enum):
    ZH = "zh"
    EN = "en"


class LabelStatus(str, Enum):
    UNLABELED = "unlabeled"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    MANUALLY_FLAGGED = "manually_flagged"


# Cardinality bounds per label dimension: (min, max).
_LABEL_BOUNDS = {
    "core_domains": (1, 2),
    "core_insights": (1, 3),
    "core_values": (1, 2),
    "applicability": (0, 2),
    "sentiment_tone": (1, 2),
}

# Deep meanings are capped at 50 whitespace words in English; Chinese has no
# whitespace words, so cap at 100 characters (~2 chars per word).
_DEEP_MEANING_MAX_EN_WORDS = 50
_DEEP_MEANING_MAX_ZH_CHARS = 100


def deep_meaning_length_ok(text: str, language: Language) -> bool:
    """Check the per-language length cap for a deep-meaning string."""
    if language == Language.ZH:
        return len(text) <= _DEEP_MEANING_MAX_ZH_CHARS
    return len(text.split()) <= _DEEP_MEANING_MAX_EN_WORDS


@dataclass(frozen=True)
class LabelSet:
    """Multi-dimensional semantic labels for a quotation or context."""

    core_domains: tuple[str, ...]
    core_insights: tuple[str, ...]
    core_values: tuple[str, ...]
    applicability: tuple[str, ...] = ()
    sentiment_tone: tuple[str, ...] = ()
    metaphors: str | None = None
    style: str | None = None

    def validate(self) -> None:
        for dim, (lo, hi) in _LABEL_BOUNDS.items():
            entries = getattr(self, dim)
            if not (lo <= len(entries) <= hi):
                raise ValidationError(
                    f"labels.{dim} must have {lo}..{hi} entries, got {len(entries)}"
                )
            for e in entries:
                if not isinstance(e, str) or not e.strip() or e != e.strip():
                    raise ValidationError(f"labels.{dim} entry {e!r} is not a non-empty trimmed string")
        for name in ("metaphors", "style"):
            v = getattr(self, name)
            if v is not None and (not v.strip() or v != v.strip()):
                raise ValidationError(f"labels.{name} must be a non-empty trimmed string or absent")

    def to_json(self) -> dict:
        return {
            "core_domains": list(self.core_domains),
            "core_insights": list(self.core_insights),
            "core_values": list(self.core_values),
            "applicability": list(self.applicability),
            "sentiment_tone": list(self.sentiment_tone),
            "metaphors": [self.metaphors] if self.metaphors is not None else [],
            "style": self.style,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LabelSet":
        if not isinstance(obj, dict):
            raise ValidationError("labels must be an object")
        metaphors = obj.get("metaphors")
        if isinstance(metaphors, list):
            metaphors = metaphors[0] if metaphors else None
        return cls(
            core_domains=tuple(obj.get("core_domains", ())),
            core_insights=tuple(obj.get("core_insights", ())),
            core_values=tuple(obj.get("core_values", ())),
            applicability=tuple(obj.get("applicability", ())),
            sentiment_tone=tuple(obj.get("sentiment_tone", ())),
            metaphors=metaphors,
            style=obj.get("style"),
        )


@dataclass(frozen=True)
class Quotation:
    """One KB entry. Immutable; labeling produces updated copies."""

    id: str
    text: str
    language: Language
    author: str | None = None
    source_info: str | None = None
    analysis: str | None = None
    deep_meaning: str | None = None
    labels: LabelSet | None = None
    popularity_count: int | None = None
    label_status: LabelStatus = LabelStatus.UNLABELED

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("quotation id must be non-empty")
        if not self.text:
            raise ValidationError(f"quotation {self.id!r}: text must be non-empty")
        if self.popularity_count is not None and self.popularity_count < 0:
            raise ValidationError(f"quotation {self.id!r}: popularity_count must be >= 0")
        if self.deep_meaning is not None:
            if not self.deep_meaning.strip():
                raise ValidationError(f"quotation {self.id!r}: deep_meaning must be non-empty")
            if not deep_meaning_length_ok(self.deep_meaning, self.language):
                raise ValidationError(f"quotation {self.id!r}: deep_meaning exceeds the length cap")
        if self.labels is not None:
            self.labels.validate()
        if self.label_status == LabelStatus.ACCEPTED:
            missing = [
                f for f in ("analysis", "deep_meaning", "labels") if getattr(self, f) is None
            ]
            if missing:
                raise ValidationError(
                    f"quotation {self.id!r}: accepted record is missing {', '.join(missing)}"
                )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "author": self.author,
            "source_info": self.source_info,
            "language": self.language.value,
            "analysis": self.analysis,
            "deep_meaning": self.deep_meaning,
            "labels": self.labels.to_json() if self.labels is not None else None,
            "popularity_count": self.popularity_count,
            "label_status": self.label_status.value,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Quotation":
        if not isinstance(obj, dict):
            raise ValidationError("quotation record must be an object")
        try:
            language = Language(obj["language"])
            status = LabelStatus(obj.get("label_status", "unlabeled"))
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad language/label_status: {exc}") from exc
        labels = obj.get("labels")
        return cls(
            id=str(obj.get("id", "")),
            text=str(obj.get("text", "")),
            language=language,
            author=obj.get("author"),
            source_info=obj.get("source_info"),
            analysis=obj.get("analysis"),
            deep_meaning=obj.get("deep_meaning"),
            labels=LabelSet.from_json(labels) if labels is not None else None,
            popularity_count=obj.get("popularity_count"),
            label_status=status,
        )

    def with_labeling(
        self,
        analysis: str,
        deep_meaning: str,
        labels: LabelSet | None,
        status: LabelStatus,
    ) -> "Quotation":
        return replace(
            self, analysis=analysis, deep_meaning=deep_meaning, labels=labels, label_status=status
        )


@dataclass(frozen=True)
class ContextRecord:
    """A user-provided context passage, labeled online by the agent."""

    id: str
    text: str
    deep_meaning: str | None = None
    labels: LabelSet | None = None
    relevant_ids: frozenset[str] | None = None

    def validate(self, known_ids: set[str] | None = None) -> None:
        if not self.text:
            raise ValidationError(f"context {self.id!r}: text must be non-empty")
        if self.relevant_ids is not None and known_ids is not None:
            unknown = self.relevant_ids - known_ids
            if unknown:
                raise ValidationError(
                    f"context {self.id!r}: relevant_ids not in KB: {sorted(unknown)}"
                )

    @classmethod
    def from_json(cls, obj: dict) -> "ContextRecord":
        relevant = obj.get("relevant_ids")
        labels = obj.get("labels")
        return cls(
            id=str(obj.get("id", "")),
            text=str(obj.get("text", "")),
            deep_meaning=obj.get("deep_meaning"),
            labels=LabelSet.from_json(labels) if labels is not None else None,
            relevant_ids=frozenset(relevant) if relevant is not None else None,
        )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "deep_meaning": self.deep_meaning,
            "labels": self.labels.to_json() if self.labels is not None else None,
            "relevant_ids": sorted(self.relevant_ids) if self.relevant_ids is not None else None,
        }


_UNIT_NORM_TOL = 1e-4


@dataclass(eq=False)
class EmbeddingVector:
    """Fixed-length float32 vector with a declared normalization kind."""

    values: np.ndarray
    norm_kind: str = "unit"  # "unit" | "raw"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)

    def validate(self, dim: int | None = None) -> None:
        if self.values.ndim != 1:
            raise ValidationError("embedding must be one-dimensional")
        if dim is not None and self.values.shape[0] != dim:
            raise ValidationError(
                f"embedding dimension {self.values.shape[0]} does not match declared {dim}"
            )
        if self.norm_kind not in ("unit", "raw"):
            raise ValidationError(f"unknown norm_kind {self.norm_kind!r}")
        if self.norm_kind == "unit":
            n = float(np.linalg.norm(self.values))
            if abs(n - 1.0) > _UNIT_NORM_TOL:
                raise ValidationError(f"unit vector has norm {n:.6f}")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmbeddingVector)
            and self.norm_kind == other.norm_kind
            and np.array_equal(self.values, other.values)
        )


# ---------------------------------------------------------------------------
# JSONL persistence


def load_kb(path: str | Path) -> list[Quotation]:
    """Load a KB file, rejecting malformed lines and duplicate ids."""
    path = Path(path)
    records: list[Quotation] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                record = Quotation.from_json(obj)
                record.validate()
            except ValidationError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if record.id in seen:
                raise IntegrityError(
                    f"duplicate id {record.id!r} on lines {seen[record.id]} and {lineno}"
                )
            seen[record.id] = lineno
            records.append(record)
    return records


def save_kb(records: list[Quotation], path: str | Path) -> None:
    """Write a KB file. Validates every record before the first byte is written."""
    seen: set[str] = set()
    for record in records:
        record.validate()
        if record.id in seen:
            raise IntegrityError(f"duplicate id {record.id!r}")
        seen.add(record.id)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
    tmp.replace(path)


def load_contexts(path: str | Path, known_ids: set[str] | None = None) -> list[ContextRecord]:
    """Load a JSONL file of context passages, optionally checking relevant_ids."""
    path = Path(path)
    records: list[ContextRecord] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                record = ContextRecord.from_json(obj)
                record.validate(known_ids)
            except ValidationError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if record.id in seen:
                raise IntegrityError(
                    f"duplicate id {record.id!r} on lines {seen[record.id]} and {lineno}"
                )
            seen[record.id] = lineno
            records.append(record)
    return records


# ---------------------------------------------------------------------------
# Embedding sidecar

EMBEDDING_SLOTS = ("deep_meaning", "quote_text", "label_concat")

_MAGIC = b"NQRE"


class EmbeddingStore:
    """In-memory (id, slot) -> vector map with a binary file format.

    File layout: magic "NQRE", uint32 little-endian header length, UTF-8 JSON
    header {dim, count, slots}, then count rows of dim packed little-endian
    float32 values. The header's slots map carries (row index, norm_kind) per id.
    """

    def __init__(self, dim: int):
        if dim <= 0:
            raise ValidationError("embedding store dimension must be positive")
        self.dim = dim
        self._data: dict[tuple[str, str], EmbeddingVector] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._data)

    @staticmethod
    def _check_slot(slot: str) -> None:
        if slot not in EMBEDDING_SLOTS:
            raise ValidationError(f"unknown embedding slot {slot!r}")

    def put(self, id: str, slot: str, vector: EmbeddingVector) -> None:
        self._check_slot(slot)
        vector.validate(dim=self.dim)
        with self._lock:
            self._data[(slot, id)] = vector

    def get(self, id: str, slot: str) -> EmbeddingVector:
        self._check_slot(slot)
        try:
            return self._data[(slot, id)]
        except KeyError:
            raise NotFoundError(f"no embedding for id={id!r} slot={slot!r}") from None

    def has(self, id: str, slot: str) -> bool:
        return (slot, id) in self._data

    def ids(self, slot: str) -> list[str]:
        self._check_slot(slot)
        return sorted(id for s, id in self._data if s == slot)

    def save(self, path: str | Path) -> None:
        keys = sorted(self._data)
        slots: dict[str, dict[str, list]] = {}
        rows = np.zeros((len(keys), self.dim), dtype="<f4")
        for row, (slot, id) in enumerate(keys):
            vec = self._data[(slot, id)]
            rows[row] = vec.values
            slots.setdefault(slot, {})[id] = [row, vec.norm_kind]
        header = json.dumps(
            {"dim": self.dim, "count": len(keys), "slots": slots}, separators=(",", ":")
        ).encode("utf-8")
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with tmp.open("wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(rows.tobytes())
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingStore":
        path = Path(path)
        with path.open("rb") as fh:
            if fh.read(4) != _MAGIC:
                raise ParseError(f"{path} is not an embedding store (bad magic)")
            (header_len,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(header_len).decode("utf-8"))
            dim, count = int(header["dim"]), int(header["count"])
            raw = fh.read(count * dim * 4)
        if len(raw) != count * dim * 4:
            raise ParseError(f"{path}: truncated row data")
        rows = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
        store = cls(dim)
        for slot, entries in header["slots"].items():
            for id, (row, norm_kind) in entries.items():
                store.put(id, slot, EmbeddingVector(rows[int(row)].copy(), norm_kind=norm_kind))
        return store
