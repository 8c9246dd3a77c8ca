"""HTTP surface: POST /v1/score and GET /healthz per the shared wire contract.

Endpoints are plain sync handlers, so the framework runs them on its bounded
worker pool; model state is read-only after load, which makes concurrent
scoring safe without locks.
"""

from __future__ import annotations

import json
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import SidecarConfig
from .scoring import Scorer, ScoringError

log = logging.getLogger(__name__)


def create_app(config: SidecarConfig | None = None) -> FastAPI:
    config = config or SidecarConfig()
    app = FastAPI(title="detector-sidecar")
    app.state.config = config
    app.state.scorer = None
    app.state.load_error = None
    try:
        app.state.scorer = Scorer(config)
    except Exception as exc:  # surfaced through /healthz as a 503
        log.error("model load failed: %s", exc)
        app.state.load_error = str(exc)

    @app.get("/healthz")
    def healthz():
        if app.state.scorer is None:
            return JSONResponse(
                {"status": "error", "detail": app.state.load_error or "models not loaded"},
                status_code=503,
            )
        return {"status": "ok"}

    @app.post("/v1/score")
    async def score(request: Request):
        if app.state.scorer is None:
            return JSONResponse(
                {"detail": app.state.load_error or "models not loaded"}, status_code=503
            )
        try:
            body = json.loads(await request.body() or b"")
        except json.JSONDecodeError:
            return JSONResponse({"detail": "request body must be JSON"}, status_code=400)
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            return JSONResponse(
                {"detail": 'request body must be {"text": "..."}'}, status_code=400
            )
        text = body["text"]
        if not text:
            return JSONResponse({"detail": "text must be non-empty"}, status_code=400)
        if len(text) > config.max_text_chars:
            return JSONResponse(
                {
                    "detail": (
                        f"text is {len(text)} characters; the maximum is "
                        f"{config.max_text_chars}"
                    )
                },
                status_code=413,
            )
        try:
            return app.state.scorer.score_text(text)
        except ScoringError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)

    return app
