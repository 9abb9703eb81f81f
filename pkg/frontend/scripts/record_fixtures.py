"""Record API response fixtures for the web UI tests.

Stands up the recommendation service in-process against the 50-quote
fixture knowledge base and captures real /v1/recommend responses into
tests/fixtures/.  The stepped-perplexity trace fixture cannot come from
a live endpoint (the bundled bigram model never produces that curve), so
it is built from supplied log-probabilities and serialized through the
same response writer the server uses.

Run from the repository root after installing the Python package:

    python frontend/scripts/record_fixtures.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from nqr.config import AppConfig
from nqr.kb import ContextRecord, LabelStatus, Language, Quotation, load_kb
from nqr.novelty import TokenSequence, trace_from_logprobs
from nqr.pipeline import (
    RecommendResponse,
    build_backends,
    embed_kb,
    save_prior_traces,
)
from nqr.rerank import RerankResult, RerankWeights, fuse
from nqr.server import create_app

REPO_ROOT = Path(__file__).resolve().parents[2]
DATA_DIR = REPO_ROOT / "tests" / "data"
FIXTURE_DIR = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

CONTEXT = (DATA_DIR / "golden_context.txt").read_text(encoding="utf-8").strip()
K = 8


def build_env(root: Path) -> AppConfig:
    kb_path = root / "kb.jsonl"
    shutil.copy(DATA_DIR / "kb.jsonl", kb_path)
    config = AppConfig(
        kb_path=str(kb_path),
        embedding_store_path=str(root / "embeddings.bin"),
    )
    records = load_kb(kb_path)
    backends = build_backends(
        config, kb_texts=[q.text for q in records], need=("lm", "embedder")
    )
    store, priors, _ = embed_kb(records, backends.embedder, backends.lm)
    store.save(config.embedding_store_path)
    save_prior_traces(config.priors_path, backends.lm.name, priors)
    return config


def record_endpoint_fixtures(client: TestClient) -> None:
    requests = {
        "recommend_default.json": {"context": CONTEXT, "k": K},
        "recommend_novelty_only.json": {
            "context": CONTEXT,
            "k": K,
            "weights": {"lambda_n": 1.0, "lambda_p": 0.0, "lambda_m": 0.0},
        },
        "recommend_match_only.json": {
            "context": CONTEXT,
            "k": K,
            "weights": {"lambda_n": 0.0, "lambda_p": 0.0, "lambda_m": 1.0},
        },
    }
    for name, body in requests.items():
        res = client.post("/v1/recommend", json=body)
        res.raise_for_status()
        payload = {"request": body, "response": res.json()}
        (FIXTURE_DIR / name).write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        top = res.json()["results"][0]["quotation"]["id"]
        print(f"wrote {name} (top result {top})")


def record_stepped_trace_fixture() -> None:
    """A five-token trace whose perplexity steps 5,5,5,9,5.

    The curvature weighting puts all mass on the last two tokens, which
    is what the heatmap test looks for.
    """
    ppl = [5.0, 5.0, 5.0, 9.0, 5.0]
    r = [2.0, 0.1, 0.1, 1.0, -0.5]
    logp_prior = [-math.log(p) for p in ppl]
    logp_cond = [lp - ri for lp, ri in zip(logp_prior, r)]
    texts = ("every", "wall", "is", "a", "door")
    tokens = TokenSequence(tuple(range(len(texts))), texts)
    trace = trace_from_logprobs(tokens, logp_prior, logp_cond)

    weights = RerankWeights(lambda_n=0.70, lambda_p=0.20, lambda_m=0.10)
    s_p, s_m = 0.5, 0.8
    quote = Quotation(
        id="qfix",
        text=" ".join(texts),
        language=Language.EN,
        deep_meaning="Express that obstacles are unrecognized openings",
        label_status=LabelStatus.ACCEPTED,
    )
    result = RerankResult(
        quotation_id=quote.id,
        s_n=trace.s_n,
        s_p=s_p,
        s_m=s_m,
        s_final=fuse(trace.s_n, s_p, s_m, weights),
        rank=1,
        trace=trace,
    )
    response = RecommendResponse(
        results=[result],
        timings_ms={"label": 0.0, "retrieve": 0.0, "rerank": 0.0, "total": 0.0},
        context=ContextRecord(id="fixture", text="stepped perplexity fixture"),
    )
    payload = {"request": None, "response": response.to_json({quote.id: quote})}
    (FIXTURE_DIR / "trace_stepped.json").write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    print(f"wrote trace_stepped.json (s_n={trace.s_n:.4f})")


def main() -> int:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        config = build_env(Path(tmp))
        client = TestClient(create_app(config))
        record_endpoint_fixtures(client)
    record_stepped_trace_fixture()
    return 0


if __name__ == "__main__":
    sys.exit(main())
