"""
The full artifact lifecycle, ending at the HTTP API
===================================================

A corpus becomes a recommendation service in four steps: ingest validates the
records, label runs the critique protocol to attach deep meanings, embed
builds the vector store and prior token traces, and popularity fills in web
counts. After that the server only reads artifacts. This script drives each
step through the command-line entry points inside a temporary directory, then
queries the resulting service in-process.
"""

import json
import logging
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

logging.getLogger("httpx").setLevel(logging.WARNING)

from nqr.cli import main as nqr
from nqr.config import AppConfig
from nqr.kb import Language, Quotation, save_kb
from nqr.server import create_app

quotes = [
    "Patience is a seed that flowers out of season.",
    "A problem worth keeping changes the keeper.",
    "Doubt is the shadow cast by a question worth asking.",
    "Maps end where the interesting country begins.",
    "Every harbor was once open sea.",
    "Rest is the rhyme that makes the work scan.",
]

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    kb_path = root / "kb.jsonl"
    store_path = root / "embeddings.bin"

    # -----------------------------------------------------------------------
    # Step 0: a raw corpus. Only ids, texts, and languages; everything else
    # is produced by the pipeline.
    # -----------------------------------------------------------------------
    records = [
        Quotation(id=f"w{i:02d}", text=text, language=Language.EN)
        for i, text in enumerate(quotes, start=1)
    ]
    save_kb(records, kb_path)

    # A fixture search engine backs the popularity step: a file of phrase ->
    # result-count rows standing in for a live web search API.
    counts = [520_000, 48, 9_300, 1_200, 260_000, 75]
    with (root / "popularity.jsonl").open("w", encoding="utf-8") as fh:
        for text, count in zip(quotes, counts):
            fh.write(json.dumps({"phrase": text, "engine": "fixture", "count": count}) + "\n")

    # -----------------------------------------------------------------------
    # Steps 1-4, exactly as they would run in a shell.
    # -----------------------------------------------------------------------
    print("$ nqr ingest")
    nqr(["ingest", "--kb", str(kb_path)])

    print("\n$ nqr label")
    nqr(["label", "--kb", str(kb_path)])

    print("\n$ nqr embed")
    nqr(["embed", "--kb", str(kb_path), "--store", str(store_path)])

    print("\n$ nqr popularity")
    nqr([
        "popularity", "--kb", str(kb_path),
        "--engine", "fixture", "--fixture", str(root / "popularity.jsonl"),
    ])

    # -----------------------------------------------------------------------
    # Serve. The app loads every artifact once at startup; requests are pure
    # reads. TestClient runs it in-process, so no port is opened here, but
    # `nqr serve --config config.json` exposes the identical application.
    # -----------------------------------------------------------------------
    config = AppConfig(kb_path=str(kb_path), embedding_store_path=str(store_path))
    client = TestClient(create_app(config))

    body = {
        "context": (
            "A colleague wants to abandon a project that has stalled for "
            "months, and I want to make the case for patience."
        ),
        "k": 3,
    }
    print("\n$ POST /v1/recommend")
    reply = client.post("/v1/recommend", json=body).json()
    print(f"context read as: {reply['context_deep_meaning']}")
    for item in reply["results"]:
        q = item["quotation"]
        print(
            f"  {item['rank']}. {q['id']}  final={item['s_final']:.4f}"
            f"  (n={item['s_n']:.4f}  p={item['s_p']:.4f}  m={item['s_m']:.4f})"
        )
        print(f"     {q['text']}")
    print(f"served in {reply['timings_ms']['total']:.1f} ms")

    top = reply["results"][0]["quotation"]["id"]
    print(f"\n$ GET /v1/quote/{top}")
    record = client.get(f"/v1/quote/{top}").json()
    print(f"  deep meaning: {record['deep_meaning']}")
    print(f"  popularity count: {record['popularity_count']}")
