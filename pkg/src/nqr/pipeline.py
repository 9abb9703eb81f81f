"""End-to-end orchestration shared by the CLI and the HTTP service.

Owns backend construction, artifact loading with stage checks, the offline
steps (labeling, embedding, prior passes, popularity), and the online
recommend flow.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .backends import (
    BigramLm,
    CachedSearch,
    CannedChat,
    FixtureSearch,
    HashingEmbedder,
    LocalChat,
    PopularityCache,
    RemoteChat,
    RemoteEmbedder,
    RemoteLm,
    RemoteSearch,
    TokenSequence,
)
from .config import AppConfig
from .errors import NotFoundError, StageError, ValidationError
from .evaluation import LAMBDA_SWEEP, EvalReport, JudgeSpec, run_eval
from .kb import (
    EMBEDDING_SLOTS,
    ContextRecord,
    EmbeddingStore,
    LabelSet,
    Quotation,
    load_contexts,
    load_kb,
)
from .labeling import LabelAgent
from .novelty import PriorTrace, prior_pass, prior_trace_from_logp
from .rerank import RerankResult, RerankWeights, rerank
from .retrieval import retrieve

__all__ = [
    "Backends",
    "RecommendResponse",
    "QuoteRecommender",
    "build_backends",
    "label_concat_text",
    "embed_kb",
    "apply_popularity",
    "save_prior_traces",
    "load_prior_traces",
    "TRACE_TOKEN_LIMIT",
]

logger = logging.getLogger(__name__)

# responses carry full per-token traces unless the quote is longer than this
TRACE_TOKEN_LIMIT = 512


@dataclass(frozen=True)
class Backends:
    lm: object = None
    embedder: object = None
    chat: object = None
    search: object = None


_ALL_SLOTS = ("lm", "embedder", "chat", "search")


def build_backends(
    config: AppConfig,
    kb_texts: Sequence[str] | None = None,
    need: Sequence[str] = _ALL_SLOTS,
) -> Backends:
    """Instantiate the requested backend slots from their configs.

    Slots not in `need` stay None; this keeps commands from requiring
    artifacts (like a popularity fixture file) they never touch.
    """
    config.validate()
    unknown = [s for s in need if s not in _ALL_SLOTS]
    if unknown:
        raise ValidationError(f"unknown backend slots: {unknown}")
    built: dict[str, object] = {}

    if "lm" in need:
        if config.lm.kind == "stub":
            if not kb_texts:
                raise ValidationError("the stub language model needs KB texts as its corpus")
            built["lm"] = BigramLm(kb_texts)
        else:
            built["lm"] = RemoteLm(config.lm.endpoint, api_key=config.lm.api_key)

    if "embedder" in need:
        if config.embedder.kind == "hash":
            built["embedder"] = HashingEmbedder(dim=config.embedder.dim or 256)
        else:
            built["embedder"] = RemoteEmbedder(
                config.embedder.endpoint, api_key=config.embedder.api_key
            )

    if "chat" in need:
        if config.chat.kind == "local":
            built["chat"] = LocalChat()
        elif config.chat.kind == "canned":
            built["chat"] = CannedChat(config.chat.path)
        else:
            built["chat"] = RemoteChat(config.chat.endpoint, api_key=config.chat.api_key)

    if "search" in need:
        if config.search.kind == "fixture":
            search = FixtureSearch(config.search.path)
        else:
            search = RemoteSearch(config.search.endpoint, api_key=config.search.api_key)
        if config.search.cache_path:
            search = CachedSearch(search, PopularityCache(config.search.cache_path))
        built["search"] = search

    return Backends(**built)


# ---------------------------------------------------------------------------
# offline steps


def label_concat_text(labels: LabelSet) -> str:
    """Flatten a LabelSet into one comma-joined string for embedding."""
    parts = list(labels.core_domains)
    parts += list(labels.core_insights)
    parts += list(labels.core_values)
    parts += list(labels.applicability)
    parts += list(labels.sentiment_tone)
    if labels.metaphors:
        parts.append(labels.metaphors)
    if labels.style:
        parts.append(labels.style)
    return ", ".join(parts)


def embed_kb(
    records: Sequence[Quotation],
    embedder,
    lm,
    slots: Sequence[str] = EMBEDDING_SLOTS,
    store: EmbeddingStore | None = None,
) -> tuple[EmbeddingStore, dict[str, PriorTrace], dict[str, int]]:
    """Fill the embedding store and run the prior pass for every quotation.

    Slots whose source text is absent (no deep meaning, no labels) are
    skipped for that record rather than failing the run.
    """
    unknown = [s for s in slots if s not in EMBEDDING_SLOTS]
    if unknown:
        raise ValidationError(f"unknown embedding slots: {unknown}")
    if store is None:
        store = EmbeddingStore(dim=embedder.dim)
    counts = {slot: 0 for slot in slots}
    priors: dict[str, PriorTrace] = {}
    for q in records:
        for slot in slots:
            if slot == "quote_text":
                text = q.text
            elif slot == "deep_meaning":
                text = q.deep_meaning
            else:
                text = label_concat_text(q.labels) if q.labels is not None else None
            if not text:
                continue
            store.put(q.id, slot, embedder.embed(text))
            counts[slot] += 1
        priors[q.id] = prior_pass(q.text, lm)
    return store, priors, counts


def apply_popularity(
    records: Sequence[Quotation], search, engine: str
) -> tuple[list[Quotation], int, list[str]]:
    """Look up web result counts for every quotation text.

    Returns the updated records, how many were found, and the ids with no
    entry (left untouched; reranking treats them as neutral).
    """
    updated: list[Quotation] = []
    missing: list[str] = []
    found = 0
    for q in records:
        try:
            count = search.count(q.text, engine)
        except NotFoundError:
            missing.append(q.id)
            updated.append(q)
            continue
        updated.append(replace(q, popularity_count=count))
        found += 1
    if missing:
        logger.warning("no popularity entry for %d quotation(s), e.g. %s", len(missing), missing[0])
    return updated, found, missing


# ---------------------------------------------------------------------------
# prior-trace persistence


def save_prior_traces(path: str | Path, lm_name: str, traces: Mapping[str, PriorTrace]) -> None:
    payload = {
        "lm": lm_name,
        "traces": {
            qid: {
                "token_ids": list(t.tokens.token_ids),
                "token_texts": list(t.tokens.token_texts),
                "logp_prior": list(t.logp_prior),
            }
            for qid, t in traces.items()
        },
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
    tmp.replace(path)


def load_prior_traces(path: str | Path, expected_lm: str) -> dict[str, PriorTrace]:
    """Rebuild cached prior traces, refusing ones from a different model."""
    path = Path(path)
    obj = json.loads(path.read_text(encoding="utf-8"))
    if obj.get("lm") != expected_lm:
        raise StageError(
            f"prior traces in {path} were computed with lm {obj.get('lm')!r} but the"
            f" configured lm is {expected_lm!r}; re-run: nqr embed",
            missing_artifact=f"prior traces for lm {expected_lm!r}",
        )
    out: dict[str, PriorTrace] = {}
    for qid, entry in obj.get("traces", {}).items():
        tokens = TokenSequence(tuple(entry["token_ids"]), tuple(entry["token_texts"]))
        out[qid] = prior_trace_from_logp(tokens, np.asarray(entry["logp_prior"], dtype=np.float64))
    return out


# ---------------------------------------------------------------------------
# online flow


@dataclass
class RecommendResponse:
    results: list[RerankResult]
    timings_ms: dict[str, float]
    context: ContextRecord

    def to_json(self, kb: Mapping[str, Quotation], max_trace_tokens: int | None = None) -> dict:
        out = []
        for r in self.results:
            trace = {
                "token_texts": list(r.trace.tokens.token_texts),
                "w_tilde": list(r.trace.w_tilde),
                "r": list(r.trace.r),
                "truncated": False,
            }
            if max_trace_tokens is not None and len(trace["token_texts"]) > max_trace_tokens:
                for key in ("token_texts", "w_tilde", "r"):
                    trace[key] = trace[key][:max_trace_tokens]
                trace["truncated"] = True
            out.append(
                {
                    "quotation": kb[r.quotation_id].to_json(),
                    "s_final": r.s_final,
                    "s_n": r.s_n,
                    "s_p": r.s_p,
                    "s_m": r.s_m,
                    "rank": r.rank,
                    "trace": trace,
                }
            )
        return {
            "results": out,
            "timings_ms": self.timings_ms,
            "context_deep_meaning": self.context.deep_meaning,
        }


class QuoteRecommender:
    """Loads all artifacts once and serves recommendations from memory."""

    def __init__(self, config: AppConfig):
        config.validate()
        self.config = config
        kb_file = Path(config.kb_path)
        if not kb_file.exists():
            raise StageError(
                f"knowledge base {kb_file} not found; run: nqr ingest --kb {kb_file}",
                missing_artifact=str(kb_file),
            )
        self.records = load_kb(kb_file)
        if not self.records:
            raise ValidationError(f"knowledge base {kb_file} is empty")
        self.kb: dict[str, Quotation] = {q.id: q for q in self.records}
        self.backends = build_backends(
            config, kb_texts=[q.text for q in self.records], need=("lm", "embedder", "chat")
        )

        store_file = Path(config.embedding_store_path)
        if not store_file.exists():
            raise StageError(
                f"embedding store {store_file} not found; run: nqr embed --kb {config.kb_path}",
                missing_artifact=str(store_file),
            )
        self.store = EmbeddingStore.load(store_file)

        priors_file = Path(config.priors_path)
        if priors_file.exists():
            self.prior_traces = load_prior_traces(priors_file, self.backends.lm.name)
        else:
            logger.info("no prior-trace cache at %s; priors computed per request", priors_file)
            self.prior_traces = None

        self.label_agent = LabelAgent(self.backends.chat)

    # -- pieces --

    def prepare_context(self, context: ContextRecord, mode: str) -> ContextRecord:
        """Label the context online when LR retrieval needs it."""
        if mode == "LR" and (context.deep_meaning is None or context.labels is None):
            return self.label_agent.label_context(context)
        return context

    def _retrieve(self, context: ContextRecord, mode: str) -> list:
        cfg = replace(self.config.retrieval, mode=mode)
        return retrieve(context, cfg, self.records, self.store, self.backends.embedder)

    def _score(
        self, context: ContextRecord, candidate_ids: Sequence[str], mode: str, weights: RerankWeights
    ) -> list[RerankResult]:
        if mode == "LR":
            context_vec = self.backends.embedder.embed(context.deep_meaning)
            match_slot = "deep_meaning"
        else:
            context_vec = self.backends.embedder.embed(context.text)
            match_slot = "quote_text"
        return rerank(
            candidate_ids,
            context.text,
            context_vec,
            self.kb,
            self.backends.lm,
            self.store,
            weights=weights,
            pop_params=self.config.popularity,
            match_slot=match_slot,
            prior_traces=self.prior_traces,
        )

    def _rank(
        self,
        context: ContextRecord,
        mode: str,
        weights: RerankWeights,
        candidate_cache: dict | None = None,
    ) -> list[RerankResult]:
        cache_key = (context.id, mode)
        candidates = candidate_cache.get(cache_key) if candidate_cache is not None else None
        if candidates is None:
            candidates = self._retrieve(context, mode)
            if candidate_cache is not None:
                candidate_cache[cache_key] = candidates
        return self._score(context, [c.quotation_id for c in candidates], mode, weights)

    # -- public API --

    def recommend(
        self,
        context_text: str,
        k: int = 5,
        mode: str | None = None,
        weights: RerankWeights | None = None,
    ) -> RecommendResponse:
        if not context_text or not context_text.strip():
            raise ValidationError("context must be non-empty")
        if k < 1:
            raise ValidationError("k must be >= 1")
        mode = mode or self.config.retrieval.mode
        if mode not in ("LR", "QR"):
            raise ValidationError(f"mode must be LR or QR, got {mode!r}")
        weights = weights or self.config.weights

        t_start = time.perf_counter()
        context = ContextRecord(id="request", text=context_text)
        context = self.prepare_context(context, mode)
        t_label = time.perf_counter()
        candidates = self._retrieve(context, mode)
        t_retrieve = time.perf_counter()
        ranked = self._score(context, [c.quotation_id for c in candidates], mode, weights)
        t_done = time.perf_counter()
        timings = {
            "label": (t_label - t_start) * 1000.0,
            "retrieve": (t_retrieve - t_label) * 1000.0,
            "rerank": (t_done - t_retrieve) * 1000.0,
            "total": (t_done - t_start) * 1000.0,
        }
        return RecommendResponse(results=ranked[:k], timings_ms=timings, context=context)

    def quote(self, quotation_id: str) -> Quotation:
        try:
            return self.kb[quotation_id]
        except KeyError:
            raise NotFoundError(f"no quotation with id {quotation_id!r}") from None

    def config_view(self) -> dict:
        view = self.config.to_json(redact=True)
        view["kb_size"] = len(self.records)
        return view

    # -- evaluation --

    def run_eval_config(self, eval_cfg: dict) -> EvalReport:
        if not isinstance(eval_cfg, dict):
            raise ValidationError("eval config must be a JSON object")
        contexts_path = eval_cfg.get("contexts_path")
        if not contexts_path:
            raise ValidationError("eval config needs contexts_path")
        contexts = load_contexts(contexts_path, known_ids=set(self.kb))
        if not contexts:
            raise ValidationError(f"no contexts in {contexts_path}")
        k = int(eval_cfg.get("k", 5))
        default_mode = eval_cfg.get("mode", self.config.retrieval.mode)

        system_specs: list[tuple[str, str, RerankWeights]] = []
        if eval_cfg.get("lambda_sweep"):
            for lam_n, lam_p, lam_m in LAMBDA_SWEEP:
                name = f"{lam_n:.2f}/{lam_p:.2f}/{lam_m:.2f}"
                system_specs.append((name, default_mode, RerankWeights(lam_n, lam_p, lam_m)))
        elif eval_cfg.get("systems"):
            for entry in eval_cfg["systems"]:
                name = entry.get("name")
                if not name:
                    raise ValidationError("each eval system needs a name")
                mode = entry.get("mode", default_mode)
                weights = (
                    RerankWeights(**entry["weights"]) if entry.get("weights") else self.config.weights
                )
                system_specs.append((name, mode, weights))
        else:
            system_specs.append(("default", default_mode, self.config.weights))

        modes_used = {mode for _, mode, _ in system_specs}
        prepared = []
        for ctx in contexts:
            if "LR" in modes_used:
                ctx = self.prepare_context(ctx, "LR")
            prepared.append(ctx)

        candidate_cache: dict = {}
        systems = {
            name: (
                lambda ctx, _m=mode, _w=weights: [
                    r.quotation_id for r in self._rank(ctx, _m, _w, candidate_cache)
                ]
            )
            for name, mode, weights in system_specs
        }

        judge_cfg = eval_cfg.get("judge") or {}
        judges = []
        if judge_cfg.get("enabled"):
            judges.append(
                JudgeSpec(
                    chat=self.backends.chat,
                    temperature=float(judge_cfg.get("temperature", 0.0)),
                    samples=int(judge_cfg.get("samples", 1)),
                )
            )
        report = run_eval(
            systems,
            prepared,
            k=k,
            kb=self.kb if judges else None,
            judges=judges,
            baseline=eval_cfg.get("baseline"),
            bootstrap_b=int(eval_cfg.get("bootstrap_b", 1000)),
            seed=int(eval_cfg.get("seed", 0)),
        )
        out_dir = eval_cfg.get("out_dir")
        if out_dir:
            report.write(out_dir)
        return report
