"""Search-count backends and the on-disk popularity cache."""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path

from ..errors import NotFoundError, ParseError, ValidationError
from .base import SearchBackend

__all__ = ["SEARCH_ENGINES", "FixtureSearch", "PopularityCache", "CachedSearch"]

SEARCH_ENGINES = ("bing", "google", "baidu", "fixture")


def _check(phrase: str, engine: str) -> None:
    if not phrase:
        raise ValidationError("phrase must be non-empty")
    if engine not in SEARCH_ENGINES:
        raise ValidationError(f"unknown search engine {engine!r}")


class FixtureSearch(SearchBackend):
    """Serves counts from a JSONL fixture of {"phrase", "engine", "count"} rows.

    The "fixture" engine matches any recorded entry for the phrase; named
    engines require an exact engine match.
    """

    name = "fixture-search"

    def __init__(self, path: str | Path):
        self._by_engine: dict[tuple[str, str], int] = {}
        self._by_phrase: dict[str, int] = {}
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    phrase, engine, count = obj["phrase"], obj["engine"], int(obj["count"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ParseError(f"bad popularity fixture row: {exc}", line=lineno) from exc
                if count < 0:
                    raise ParseError("count must be non-negative", line=lineno)
                self._by_engine[(engine, phrase)] = count
                self._by_phrase.setdefault(phrase, count)

    def count(self, phrase: str, engine: str) -> int:
        _check(phrase, engine)
        if engine == "fixture":
            if phrase in self._by_phrase:
                return self._by_phrase[phrase]
        elif (engine, phrase) in self._by_engine:
            return self._by_engine[(engine, phrase)]
        raise NotFoundError(f"no fixture count for phrase {phrase!r} (engine {engine!r})")


class PopularityCache:
    """Persistent (engine, phrase) -> count map with recorded fetch timestamps.

    Counts are snapshot-dependent, so the timestamp travels with the value.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._data: dict[str, dict[str, dict]] = {}
        if self.path.exists():
            self._data = json.loads(self.path.read_text(encoding="utf-8"))

    def get(self, engine: str, phrase: str) -> int | None:
        entry = self._data.get(engine, {}).get(phrase)
        return None if entry is None else int(entry["count"])

    def put(self, engine: str, phrase: str, count: int) -> None:
        with self._lock:
            self._data.setdefault(engine, {})[phrase] = {
                "count": int(count),
                "fetched_at": datetime.now(timezone.utc).isoformat(),
            }

    def save(self) -> None:
        with self._lock:
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            tmp.write_text(
                json.dumps(self._data, ensure_ascii=False, indent=2, sort_keys=True),
                encoding="utf-8",
            )
            tmp.replace(self.path)


class CachedSearch(SearchBackend):
    """Wraps another search backend with a read-through popularity cache."""

    name = "cached-search"

    def __init__(self, inner: SearchBackend, cache: PopularityCache):
        self.inner = inner
        self.cache = cache

    def count(self, phrase: str, engine: str) -> int:
        _check(phrase, engine)
        hit = self.cache.get(engine, phrase)
        if hit is not None:
            return hit
        n = self.inner.count(phrase, engine)
        self.cache.put(engine, phrase, n)
        return n
