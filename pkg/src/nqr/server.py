"""HTTP service exposing the recommendation pipeline."""

from __future__ import annotations

import logging
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .config import AppConfig
from .errors import (
    CapabilityError,
    NotFoundError,
    NqrError,
    StageError,
    TransportError,
    ValidationError,
)
from .pipeline import TRACE_TOKEN_LIMIT, QuoteRecommender
from .rerank import RerankWeights

__all__ = ["create_app"]

logger = logging.getLogger(__name__)


def _status_for(exc: NqrError) -> int:
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, StageError):
        return 503
    if isinstance(exc, (TransportError, CapabilityError)):
        return 502
    return 400


def _parse_weights(obj) -> RerankWeights:
    if not isinstance(obj, dict):
        raise ValidationError("weights must be an object")
    allowed = {"lambda_n", "lambda_p", "lambda_m"}
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(f"unknown weight fields: {sorted(unknown)}")
    try:
        values = {key: float(obj[key]) for key in obj}
    except (TypeError, ValueError):
        raise ValidationError("weights must be numbers") from None
    return RerankWeights(**{**{"lambda_n": 0.0, "lambda_p": 0.0, "lambda_m": 0.0}, **values})


def create_app(config_or_recommender: AppConfig | QuoteRecommender) -> FastAPI:
    if isinstance(config_or_recommender, QuoteRecommender):
        recommender = config_or_recommender
    else:
        recommender = QuoteRecommender(config_or_recommender)

    app = FastAPI(title="nqr", docs_url=None, redoc_url=None)
    jobs: dict[str, dict] = {}
    jobs_lock = threading.Lock()

    @app.exception_handler(NqrError)
    async def nqr_error_handler(request: Request, exc: NqrError):
        return JSONResponse({"error": str(exc)}, status_code=_status_for(exc))

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.get("/v1/config")
    async def get_config():
        return recommender.config_view()

    @app.get("/v1/quote/{quotation_id}")
    async def get_quote(quotation_id: str):
        return recommender.quote(quotation_id).to_json()

    @app.post("/v1/recommend")
    async def post_recommend(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise ValidationError("request body must be JSON") from None
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        context = body.get("context")
        if not isinstance(context, str) or not context.strip():
            raise ValidationError("context must be a non-empty string")
        k = body.get("k", 5)
        if not isinstance(k, int) or isinstance(k, bool):
            raise ValidationError("k must be an integer")
        mode = body.get("mode")
        if mode is not None and mode not in ("LR", "QR"):
            raise ValidationError("mode must be LR or QR")
        weights = _parse_weights(body["weights"]) if body.get("weights") is not None else None
        response = recommender.recommend(context, k=k, mode=mode, weights=weights)
        return response.to_json(recommender.kb, max_trace_tokens=TRACE_TOKEN_LIMIT)

    @app.post("/v1/eval/run")
    async def post_eval_run(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise ValidationError("request body must be JSON") from None
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        eval_cfg = body.get("config", body)
        job_id = uuid.uuid4().hex[:12]
        with jobs_lock:
            jobs[job_id] = {"status": "running"}

        def run() -> None:
            try:
                report = recommender.run_eval_config(eval_cfg)
                with jobs_lock:
                    jobs[job_id] = {"status": "done", "report": report.to_json()}
            except Exception as exc:
                logger.warning("eval job %s failed: %s", job_id, exc)
                with jobs_lock:
                    jobs[job_id] = {"status": "failed", "error": str(exc)}

        threading.Thread(target=run, name=f"eval-{job_id}", daemon=True).start()
        return {"job_id": job_id, "status": "running"}

    @app.get("/v1/eval/{job_id}")
    async def get_eval(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"no eval job {job_id!r}")
        return dict(job, job_id=job_id)

    ui_dir = recommender.config.ui_dir
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
