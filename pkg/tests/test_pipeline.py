import json
import math
from dataclasses import replace
from pathlib import Path

import pytest

from nqr.backends import FixtureSearch
from nqr.config import AppConfig, BackendConfig
from nqr.errors import NotFoundError, StageError, ValidationError
from nqr.kb import LabelSet, load_kb
from nqr.pipeline import (
    QuoteRecommender,
    apply_popularity,
    build_backends,
    embed_kb,
    label_concat_text,
    load_prior_traces,
    save_prior_traces,
)
from nqr.rerank import RerankWeights

from conftest import DATA_DIR


def test_label_concat_text_joins_all_dimensions():
    labels = LabelSet(
        core_domains=("Life Philosophy",),
        core_insights=("Letting steady effort accumulate",),
        core_values=("Patience",),
        applicability=("Opening a reflective essay",),
        sentiment_tone=("Calm",),
        metaphors="River",
        style="Aphorism",
    )
    text = label_concat_text(labels)
    assert text == (
        "Life Philosophy, Letting steady effort accumulate, Patience,"
        " Opening a reflective essay, Calm, River, Aphorism"
    )
    bare = LabelSet(
        core_domains=("Life Philosophy",),
        core_insights=("Choosing depth over display",),
        core_values=("Honesty",),
        applicability=(),
        sentiment_tone=("Sober",),
        metaphors=None,
        style=None,
    )
    assert label_concat_text(bare) == "Life Philosophy, Choosing depth over display, Honesty, Sober"


def test_embed_kb_fills_all_slots():
    records = load_kb(DATA_DIR / "kb.jsonl")
    config = AppConfig()
    backends = build_backends(
        config, kb_texts=[q.text for q in records], need=("lm", "embedder")
    )
    store, priors, counts = embed_kb(records, backends.embedder, backends.lm)
    assert counts == {"deep_meaning": 50, "quote_text": 50, "label_concat": 50}
    assert len(priors) == 50
    assert store.has("q001", "deep_meaning")
    assert store.has("q050", "label_concat")
    trace = priors["q001"]
    assert len(trace.tokens) > 1
    assert math.isclose(sum(trace.w_tilde), 1.0, abs_tol=1e-9)


def test_prior_trace_round_trip(tmp_path):
    records = load_kb(DATA_DIR / "kb.jsonl")[:5]
    backends = build_backends(
        AppConfig(), kb_texts=[q.text for q in records], need=("lm", "embedder")
    )
    _, priors, _ = embed_kb(records, backends.embedder, backends.lm, slots=("quote_text",))
    path = tmp_path / "priors.json"
    save_prior_traces(path, backends.lm.name, priors)
    loaded = load_prior_traces(path, backends.lm.name)
    assert set(loaded) == set(priors)
    for qid in priors:
        assert loaded[qid].tokens == priors[qid].tokens
        assert loaded[qid].w_tilde == pytest.approx(priors[qid].w_tilde)
        assert loaded[qid].logp_prior == pytest.approx(priors[qid].logp_prior)


def test_prior_traces_reject_wrong_lm(tmp_path):
    path = tmp_path / "priors.json"
    save_prior_traces(path, "stub-bigram", {})
    with pytest.raises(StageError) as err:
        load_prior_traces(path, "other-model")
    assert "re-run" in str(err.value)
    assert err.value.missing_artifact == "prior traces for lm 'other-model'"


def test_apply_popularity_from_fixture():
    records = load_kb(DATA_DIR / "kb.jsonl")
    blank = [replace(q, popularity_count=None) for q in records]
    search = FixtureSearch(DATA_DIR / "popularity.jsonl")
    updated, found, missing = apply_popularity(blank, search, "fixture")
    assert found == 48
    assert sorted(missing) == ["q013", "q037"]
    by_id = {q.id: q for q in updated}
    original = {q.id: q for q in records}
    for qid, q in by_id.items():
        assert q.popularity_count == original[qid].popularity_count


def test_recommender_requires_kb_and_store(tmp_path):
    config = AppConfig(
        kb_path=str(tmp_path / "missing.jsonl"),
        embedding_store_path=str(tmp_path / "embeddings.bin"),
    )
    with pytest.raises(StageError) as err:
        QuoteRecommender(config)
    assert "ingest" in str(err.value)

    kb_path = tmp_path / "kb.jsonl"
    kb_path.write_text(
        (DATA_DIR / "kb_small.jsonl").read_text(encoding="utf-8"), encoding="utf-8"
    )
    config = replace(config, kb_path=str(kb_path))
    with pytest.raises(StageError) as err:
        QuoteRecommender(config)
    assert "nqr embed" in str(err.value)


def test_recommend_end_to_end(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    response = recommender.recommend(
        "A short note encouraging a friend to keep going on a slow project.", k=5
    )
    assert len(response.results) == 5
    assert [r.rank for r in response.results] == [1, 2, 3, 4, 5]
    finals = [r.s_final for r in response.results]
    assert finals == sorted(finals, reverse=True)
    for r in response.results:
        assert 0.0 <= r.s_p <= 1.0
        assert 0.0 <= r.s_m <= 1.0
        assert r.quotation_id in recommender.kb
        r.trace.validate()
    assert set(response.timings_ms) == {"label", "retrieve", "rerank", "total"}
    assert response.timings_ms["total"] > 0.0
    assert response.context.deep_meaning is not None


def test_recommend_is_deterministic(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    first = recommender.recommend("On returning to the same question for years.", k=5)
    second = recommender.recommend("On returning to the same question for years.", k=5)
    assert [r.quotation_id for r in first.results] == [r.quotation_id for r in second.results]
    assert [r.s_final for r in first.results] == [r.s_final for r in second.results]


def test_recommend_validates_input(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    with pytest.raises(ValidationError):
        recommender.recommend("   ")
    with pytest.raises(ValidationError):
        recommender.recommend("x", k=0)
    with pytest.raises(ValidationError):
        recommender.recommend("x", mode="XX")


def test_qr_mode_skips_labeling(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    response = recommender.recommend("夜里想念远方的朋友。", k=3, mode="QR")
    assert len(response.results) == 3
    assert response.context.deep_meaning is None
    assert response.timings_ms["label"] < response.timings_ms["total"]


def test_cached_priors_match_recomputation(fixture_env, tmp_path):
    with_cache = QuoteRecommender(fixture_env)
    assert with_cache.prior_traces is not None

    no_priors = replace(
        fixture_env, prior_trace_path=str(tmp_path / "nonexistent-priors.json")
    )
    without_cache = QuoteRecommender(no_priors)
    assert without_cache.prior_traces is None

    text = "A toast for a colleague finishing a long apprenticeship."
    a = with_cache.recommend(text, k=5)
    b = without_cache.recommend(text, k=5)
    assert [r.quotation_id for r in a.results] == [r.quotation_id for r in b.results]
    for ra, rb in zip(a.results, b.results):
        assert ra.s_n == pytest.approx(rb.s_n, abs=1e-12)
        assert ra.s_final == pytest.approx(rb.s_final, abs=1e-12)


def test_quote_lookup(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    assert recommender.quote("q001").text.startswith("The river")
    with pytest.raises(NotFoundError):
        recommender.quote("q999")


def test_config_view_redacts_and_reports(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    view = recommender.config_view()
    assert view["kb_size"] == 50
    assert view["weights"] == {"lambda_n": 0.70, "lambda_p": 0.20, "lambda_m": 0.10}
    assert view["retrieval"]["top_n"] == 50
    assert view["retrieval"]["label_threshold"] == 0.7


def test_response_json_trace_shape(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    response = recommender.recommend("Quiet rooms and long attention.", k=2)
    body = response.to_json(recommender.kb, max_trace_tokens=512)
    assert len(body["results"]) == 2
    first = body["results"][0]
    assert first["rank"] == 1
    assert set(first["trace"]) == {"token_texts", "w_tilde", "r", "truncated"}
    assert len(first["trace"]["token_texts"]) == len(first["trace"]["w_tilde"])
    assert len(first["trace"]["w_tilde"]) == len(first["trace"]["r"])
    assert first["trace"]["truncated"] is False
    assert first["quotation"]["id"] == first["quotation"]["id"]
    assert "timings_ms" in body


def test_run_eval_config_lambda_sweep(fixture_env, tmp_path):
    recommender = QuoteRecommender(fixture_env)
    out_dir = tmp_path / "report"
    eval_cfg = {
        "contexts_path": str(DATA_DIR / "contexts.jsonl"),
        "k": 5,
        "lambda_sweep": True,
        "bootstrap_b": 100,
        "seed": 3,
        "out_dir": str(out_dir),
    }
    report = recommender.run_eval_config(eval_cfg)
    assert len(report.systems) == 7
    assert [s.name for s in report.systems][5] == "0.70/0.20/0.10"
    assert report.ranked_contexts == 8
    assert (out_dir / "report.json").exists()
    assert (out_dir / "report.txt").exists()
    data = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
    assert len(data["systems"]) == 7
    # deltas exist for every non-baseline system
    assert len(data["bootstrap"]) == 6


def test_run_eval_config_with_judge(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    eval_cfg = {
        "contexts_path": str(DATA_DIR / "contexts.jsonl"),
        "k": 3,
        "mode": "QR",
        "judge": {"enabled": True},
        "bootstrap_b": 50,
    }
    report = recommender.run_eval_config(eval_cfg)
    s = report.systems[0]
    assert s.novelty is not None and 1.0 <= s.novelty <= 5.0
    assert s.matching is not None and 1.0 <= s.matching <= 5.0
    assert s.avg == pytest.approx((s.novelty + s.matching) / 2.0)


def test_run_eval_config_requires_contexts(fixture_env):
    recommender = QuoteRecommender(fixture_env)
    with pytest.raises(ValidationError):
        recommender.run_eval_config({})
