"""Runtime configuration: typed config file loading plus env overrides."""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ValidationError
from .rerank import PopularityParams, RerankWeights
from .retrieval import RetrievalConfig

__all__ = ["BackendConfig", "AppConfig", "ENV_OVERRIDES", "setup_logging"]

# environment variables that override config-file values; endpoints and
# API keys only, everything else comes from the file
ENV_OVERRIDES = {
    "NQR_LLM_ENDPOINT": ("lm", "endpoint"),
    "NQR_LLM_API_KEY": ("lm", "api_key"),
    "NQR_EMBED_ENDPOINT": ("embedder", "endpoint"),
    "NQR_EMBED_API_KEY": ("embedder", "api_key"),
    "NQR_SEARCH_API_KEY": ("search", "api_key"),
}

_BACKEND_KINDS = {
    "lm": ("stub", "remote"),
    "embedder": ("hash", "remote"),
    "chat": ("local", "canned", "remote"),
    "search": ("fixture", "remote"),
}


@dataclass(frozen=True)
class BackendConfig:
    """One backend slot: which implementation, plus its connection details."""

    kind: str
    endpoint: str | None = None
    api_key: str | None = None
    path: str | None = None  # fixture file or canned-response directory
    dim: int | None = None
    engine: str | None = None
    cache_path: str | None = None

    def validate(self, slot: str) -> None:
        allowed = _BACKEND_KINDS[slot]
        if self.kind not in allowed:
            raise ValidationError(
                f"{slot} backend kind must be one of {allowed}, got {self.kind!r}"
            )
        if self.kind == "remote" and not self.endpoint:
            raise ValidationError(f"{slot} backend kind 'remote' requires an endpoint")
        if self.kind in ("fixture", "canned") and not self.path:
            raise ValidationError(f"{slot} backend kind {self.kind!r} requires a path")

    @classmethod
    def from_json(cls, obj: dict) -> "BackendConfig":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValidationError("backend config must be an object with a 'kind' field")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown backend config fields: {sorted(unknown)}")
        return cls(**obj)

    def to_json(self, redact: bool = True) -> dict:
        out = {"kind": self.kind}
        for name in ("endpoint", "path", "dim", "engine", "cache_path"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.api_key is not None:
            out["api_key"] = "***" if redact else self.api_key
        return out


@dataclass(frozen=True)
class AppConfig:
    kb_path: str = "kb.jsonl"
    embedding_store_path: str = "embeddings.bin"
    prior_trace_path: str | None = None
    lm: BackendConfig = field(default_factory=lambda: BackendConfig(kind="stub"))
    embedder: BackendConfig = field(default_factory=lambda: BackendConfig(kind="hash"))
    chat: BackendConfig = field(default_factory=lambda: BackendConfig(kind="local"))
    search: BackendConfig = field(default_factory=lambda: BackendConfig(kind="fixture", path="popularity.jsonl"))
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    weights: RerankWeights = field(default_factory=RerankWeights)
    popularity: PopularityParams = field(default_factory=PopularityParams)
    host: str = "127.0.0.1"
    port: int = 8000
    log_level: str = "INFO"
    ui_dir: str | None = None

    @property
    def priors_path(self) -> str:
        if self.prior_trace_path:
            return self.prior_trace_path
        return self.embedding_store_path + ".priors.json"

    def validate(self) -> None:
        for slot in ("lm", "embedder", "chat", "search"):
            getattr(self, slot).validate(slot)
        if not 1 <= self.port <= 65535:
            raise ValidationError(f"port {self.port} out of range")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ValidationError(f"unknown log level {self.log_level!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "AppConfig":
        if not isinstance(obj, dict):
            raise ValidationError("config root must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        kwargs: dict = {}
        for key, value in obj.items():
            if key in ("lm", "embedder", "chat", "search"):
                kwargs[key] = BackendConfig.from_json(value)
            elif key == "retrieval":
                kwargs[key] = RetrievalConfig(
                    **{**value, "filter_dims": tuple(value["filter_dims"])}
                    if "filter_dims" in value
                    else value
                )
            elif key == "weights":
                kwargs[key] = RerankWeights(**value)
            elif key == "popularity":
                kwargs[key] = PopularityParams(**value)
            else:
                kwargs[key] = value
        config = cls(**kwargs)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "AppConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path}: invalid JSON: {exc.msg}") from exc
        return cls.from_json(obj)

    def apply_env(self, environ: dict[str, str]) -> "AppConfig":
        """Overlay endpoint/key overrides from the environment."""
        config = self
        for var, (slot, attr) in ENV_OVERRIDES.items():
            value = environ.get(var)
            if value:
                backend = replace(getattr(config, slot), **{attr: value})
                config = replace(config, **{slot: backend})
        return config

    def to_json(self, redact: bool = True) -> dict:
        return {
            "kb_path": self.kb_path,
            "embedding_store_path": self.embedding_store_path,
            "prior_trace_path": self.priors_path,
            "lm": self.lm.to_json(redact),
            "embedder": self.embedder.to_json(redact),
            "chat": self.chat.to_json(redact),
            "search": self.search.to_json(redact),
            "retrieval": {
                "top_n": self.retrieval.top_n,
                "label_threshold": self.retrieval.label_threshold,
                "mode": self.retrieval.mode,
                "min_pool": self.retrieval.min_pool,
                "filter_dims": list(self.retrieval.filter_dims),
            },
            "weights": {
                "lambda_n": self.weights.lambda_n,
                "lambda_p": self.weights.lambda_p,
                "lambda_m": self.weights.lambda_m,
            },
            "popularity": {"mu": self.popularity.mu, "sigma": self.popularity.sigma},
            "host": self.host,
            "port": self.port,
            "log_level": self.log_level,
            "ui_dir": self.ui_dir,
        }


class _JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "ts": self.formatTime(record, "%Y-%m-%dT%H:%M:%S%z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry, ensure_ascii=False)


def setup_logging(level: str = "INFO") -> None:
    """Route all logs to stderr as one JSON object per line."""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLineFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
