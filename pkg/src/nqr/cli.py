"""Command-line interface.

Exit codes: 0 success, 1 validation or input problems, 2 backend failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

from .config import AppConfig, BackendConfig, setup_logging
from .errors import (
    CapabilityError,
    NqrError,
    TransportError,
    ValidationError,
)
from .kb import EMBEDDING_SLOTS, load_kb, save_kb
from .labeling import LabelAgent
from .pipeline import (
    QuoteRecommender,
    apply_popularity,
    build_backends,
    embed_kb,
    save_prior_traces,
)
from .rerank import RerankWeights

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nqr", description="Novel quotation recommendation pipeline."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a knowledge base file and report counts")
    p.add_argument("--kb", required=True, help="KB JSONL path")

    p = sub.add_parser("label", help="run the label agent over the knowledge base")
    p.add_argument("--kb", required=True)
    p.add_argument("--resume", action="store_true", help="skip records that already have a label status")
    p.add_argument("--run-log", help="append per-quotation audit records to this JSONL file")
    p.add_argument("--config", help="app config JSON")

    p = sub.add_parser("embed", help="build the embedding store and prior-trace cache")
    p.add_argument("--kb", required=True)
    p.add_argument("--slots", default=",".join(EMBEDDING_SLOTS), help="comma-separated slot names")
    p.add_argument("--store", help="output store path (default from config)")
    p.add_argument("--config", help="app config JSON")

    p = sub.add_parser("popularity", help="attach web result counts to the knowledge base")
    p.add_argument("--kb", required=True)
    p.add_argument("--engine", default="fixture", help="search engine name")
    p.add_argument("--fixture", help="popularity fixture JSONL path")
    p.add_argument("--cache", help="popularity cache JSON path")
    p.add_argument("--config", help="app config JSON")

    p = sub.add_parser("recommend", help="recommend quotations for a context")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--context", help="context text")
    src.add_argument("--context-file", help="file containing the context text")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--mode", choices=("LR", "QR"), help="retrieval mode (default from config)")
    p.add_argument("--lambda-n", type=float, dest="lambda_n")
    p.add_argument("--lambda-p", type=float, dest="lambda_p")
    p.add_argument("--lambda-m", type=float, dest="lambda_m")
    p.add_argument("--trace", help="write full per-token traces to this JSON file")
    p.add_argument("--config", help="app config JSON")

    p = sub.add_parser("eval", help="run the evaluation harness")
    p.add_argument("--config", required=True, help="eval config JSON")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", help="app config JSON")
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    return parser


def _load_config(args, kb_override: str | None = None) -> AppConfig:
    path = getattr(args, "config", None)
    config = AppConfig.from_file(path) if path else AppConfig()
    config = config.apply_env(os.environ)
    if kb_override:
        config = replace(config, kb_path=kb_override)
    setup_logging(config.log_level)
    return config


def _weights_from_args(args) -> RerankWeights | None:
    given = [args.lambda_n, args.lambda_p, args.lambda_m]
    if all(v is None for v in given):
        return None
    if any(v is None for v in given):
        raise ValidationError("provide all of --lambda-n/--lambda-p/--lambda-m or none")
    return RerankWeights(args.lambda_n, args.lambda_p, args.lambda_m)


# ---------------------------------------------------------------------------
# handlers


def cmd_ingest(args) -> int:
    records = load_kb(args.kb)
    print(f"loaded {len(records)} quotation(s) from {args.kb}")
    by_status = Counter(q.label_status.value for q in records)
    for status in ("accepted", "unlabeled", "rejected", "manually_flagged"):
        if by_status.get(status):
            print(f"  {status}: {by_status[status]}")
    by_lang = Counter(q.language.value for q in records)
    print("  languages: " + ", ".join(f"{lang}={n}" for lang, n in sorted(by_lang.items())))
    with_pop = sum(1 for q in records if q.popularity_count is not None)
    print(f"  with popularity counts: {with_pop}")
    return 0


def cmd_label(args) -> int:
    config = _load_config(args, kb_override=args.kb)
    records = load_kb(args.kb)
    backends = build_backends(config, need=("chat",))
    agent = LabelAgent(backends.chat, run_log=args.run_log)
    updated, reports = agent.label_kb(records, skip_labeled=args.resume)
    save_kb(updated, args.kb)
    outcomes = Counter(r.outcome for r in reports)
    skipped = len(records) - len(reports)
    print(
        f"labeled {len(reports)} quotation(s): {outcomes.get('accepted', 0)} accepted,"
        f" {outcomes.get('rejected', 0)} rejected, {skipped} skipped"
    )
    return 0


def cmd_embed(args) -> int:
    config = _load_config(args, kb_override=args.kb)
    if args.store:
        config = replace(config, embedding_store_path=args.store)
    slots = tuple(s.strip() for s in args.slots.split(",") if s.strip())
    records = load_kb(args.kb)
    backends = build_backends(
        config, kb_texts=[q.text for q in records], need=("lm", "embedder")
    )
    store, priors, counts = embed_kb(records, backends.embedder, backends.lm, slots)
    store.save(config.embedding_store_path)
    save_prior_traces(config.priors_path, backends.lm.name, priors)
    for slot in slots:
        print(f"embedded {counts[slot]} record(s) into slot {slot}")
    print(f"prior traces: {len(priors)} (lm: {backends.lm.name})")
    print(f"store written to {config.embedding_store_path}")
    return 0


def cmd_popularity(args) -> int:
    config = _load_config(args, kb_override=args.kb)
    if args.fixture:
        config = replace(
            config,
            search=BackendConfig(kind="fixture", path=args.fixture, cache_path=args.cache),
        )
    elif args.cache:
        config = replace(config, search=replace(config.search, cache_path=args.cache))
    records = load_kb(args.kb)
    backends = build_backends(config, need=("search",))
    updated, found, missing = apply_popularity(records, backends.search, args.engine)
    save_kb(updated, args.kb)
    print(f"popularity counts: {found} found, {len(missing)} missing")
    return 0


def cmd_recommend(args) -> int:
    config = _load_config(args)
    if args.context_file:
        context_text = Path(args.context_file).read_text(encoding="utf-8").strip()
    else:
        context_text = args.context
    weights = _weights_from_args(args)
    recommender = QuoteRecommender(config)
    response = recommender.recommend(context_text, k=args.k, mode=args.mode, weights=weights)
    for r in response.results:
        quote = recommender.kb[r.quotation_id]
        print(
            f"{r.rank}. {r.quotation_id}  s_final={r.s_final:.4f}"
            f"  s_n={r.s_n:.4f}  s_p={r.s_p:.4f}  s_m={r.s_m:.4f}"
        )
        print(f"   {quote.text}")
    if args.trace:
        payload = {
            "context": context_text,
            "results": [
                {"quotation_id": r.quotation_id, "rank": r.rank, "trace": r.trace.to_json()}
                for r in response.results
            ],
        }
        Path(args.trace).write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    return 0


def cmd_eval(args) -> int:
    eval_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    app_cfg_path = eval_cfg.get("app_config")
    app_config = AppConfig.from_file(app_cfg_path) if app_cfg_path else AppConfig()
    app_config = app_config.apply_env(os.environ)
    recommender = QuoteRecommender(app_config)
    report = recommender.run_eval_config(eval_cfg)
    sys.stdout.write(report.render_text())
    out_dir = eval_cfg.get("out_dir")
    if out_dir:
        print(f"report written to {out_dir}/report.json and {out_dir}/report.txt")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    config = _load_config(args)
    if args.host:
        config = replace(config, host=args.host)
    if args.port:
        config = replace(config, port=args.port)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level=config.log_level.lower())
    return 0


_HANDLERS = {
    "ingest": cmd_ingest,
    "label": cmd_label,
    "embed": cmd_embed,
    "popularity": cmd_popularity,
    "recommend": cmd_recommend,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging("WARNING")
    try:
        return _HANDLERS[args.command](args)
    except (TransportError, CapabilityError) as exc:
        print(f"nqr {args.command}: backend error: {exc}", file=sys.stderr)
        return 2
    except NqrError as exc:
        print(f"nqr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"nqr {args.command}: error: file not found: {exc.filename}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
