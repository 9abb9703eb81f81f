"""HTTP clients for externally hosted models.

Protocol: JSON over POST, endpoints /v1/tokenize, /v1/score, /v1/next,
/v1/embed, /v1/chat, /v1/count relative to the configured base URL.
Scoring uses echo-logprobs semantics: send prefix+target ids, receive one
log-prob per target token.
"""

from __future__ import annotations

import threading
import time

import httpx
import numpy as np

from ..errors import CapabilityError, TransportError, ValidationError
from ..kb import EmbeddingVector
from .base import (
    ChatBackend,
    EmbeddingBackend,
    LmBackend,
    NextTokenDistribution,
    SearchBackend,
    TokenLogProbs,
    TokenSequence,
)

__all__ = ["RemoteLm", "RemoteEmbedder", "RemoteChat", "RemoteSearch"]

_DEFAULT_TIMEOUT = 30.0
_DEFAULT_RETRIES = 3
_DEFAULT_IN_FLIGHT = 8


class _JsonHttp:
    """Shared POST helper: auth header, retries with exponential backoff,
    bounded concurrent requests."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        timeout: float = _DEFAULT_TIMEOUT,
        retries: int = _DEFAULT_RETRIES,
        backoff: float = 0.5,
        max_in_flight: int = _DEFAULT_IN_FLIGHT,
        transport: httpx.BaseTransport | None = None,
    ):
        if not endpoint:
            raise ValidationError("endpoint must be non-empty")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(
            base_url=endpoint, timeout=timeout, headers=headers, transport=transport
        )
        self._retries = retries
        self._backoff = backoff
        self._sem = threading.Semaphore(max_in_flight)

    def post(self, path: str, payload: dict) -> dict:
        delay = self._backoff
        last: Exception | None = None
        for attempt in range(1, self._retries + 1):
            try:
                with self._sem:
                    resp = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last = exc
                if attempt < self._retries and delay > 0:
                    time.sleep(delay)
                    delay *= 2
                continue
            if resp.status_code == 501:
                raise CapabilityError(f"{path} not supported by this backend")
            if resp.status_code >= 500:
                last = TransportError(f"{path} returned {resp.status_code}", attempts=attempt)
                if attempt < self._retries and delay > 0:
                    time.sleep(delay)
                    delay *= 2
                continue
            if resp.status_code >= 400:
                raise TransportError(
                    f"{path} returned {resp.status_code}: {resp.text[:200]}",
                    attempts=attempt,
                    retryable=False,
                )
            return resp.json()
        raise TransportError(
            f"{path} failed after {self._retries} attempts: {last}", attempts=self._retries
        )


class RemoteLm(LmBackend):
    name = "remote-lm"

    def __init__(self, endpoint: str, api_key: str | None = None, context_window: int = 4096, **kw):
        self._http = _JsonHttp(endpoint, api_key, **kw)
        self.context_window = context_window

    def tokenize(self, text: str) -> TokenSequence:
        if not text:
            raise ValidationError("cannot tokenize empty text")
        obj = self._http.post("/v1/tokenize", {"text": text})
        return TokenSequence(
            token_ids=tuple(int(i) for i in obj["token_ids"]),
            token_texts=tuple(obj["token_texts"]),
        )

    def score(self, prefix: TokenSequence, target: TokenSequence) -> TokenLogProbs:
        if len(target) == 0:
            raise ValidationError("target must be non-empty")
        obj = self._http.post(
            "/v1/score",
            {"prefix": list(prefix.token_ids), "target": list(target.token_ids)},
        )
        return TokenLogProbs(logp=tuple(float(v) for v in obj["logp"]))

    def next_distribution(self, prefix: TokenSequence) -> NextTokenDistribution:
        obj = self._http.post("/v1/next", {"prefix": list(prefix.token_ids)})
        return NextTokenDistribution(
            probs={int(k): float(v) for k, v in obj["probs"].items()}
        )


class RemoteEmbedder(EmbeddingBackend):
    name = "remote-embedder"

    def __init__(self, endpoint: str, api_key: str | None = None, **kw):
        self._http = _JsonHttp(endpoint, api_key, **kw)
        self.dim = 0  # discovered from the first response

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValidationError("cannot embed empty text")
        obj = self._http.post("/v1/embed", {"text": text})
        values = np.asarray(obj["values"], dtype=np.float32)
        if self.dim == 0:
            self.dim = int(values.shape[0])
        vec = EmbeddingVector(values, norm_kind="unit")
        vec.validate(dim=self.dim)
        return vec


class RemoteChat(ChatBackend):
    name = "remote-chat"

    def __init__(self, endpoint: str, api_key: str | None = None, **kw):
        self._http = _JsonHttp(endpoint, api_key, **kw)

    def chat(self, prompt: str, temperature: float = 0.0, seed: int | None = None) -> str:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        obj = self._http.post(
            "/v1/chat", {"prompt": prompt, "temperature": temperature, "seed": seed}
        )
        return str(obj["text"])


class RemoteSearch(SearchBackend):
    name = "remote-search"

    def __init__(self, endpoint: str, api_key: str | None = None, **kw):
        self._http = _JsonHttp(endpoint, api_key, **kw)

    def count(self, phrase: str, engine: str) -> int:
        if not phrase:
            raise ValidationError("phrase must be non-empty")
        obj = self._http.post("/v1/count", {"phrase": phrase, "engine": engine})
        n = int(obj["count"])
        if n < 0:
            raise ValidationError(f"search backend returned negative count {n}")
        return n
