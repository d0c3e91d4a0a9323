"""Stateless HTTP scoring service.

Endpoints
---------
POST /v1/score
    ScoreRequest JSON in, ScoreResponse JSON out (see :mod:`hybrid_reward.protocol`).
GET /v1/health
    ``{"status": "ok", "version": ...}``
"""

from __future__ import annotations

import json
import logging
import socket
import time
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import Response

from . import __version__
from .protocol import HTTP_STATUS, INTERNAL, INVALID_REQUEST, RequestError, dumps, score_request
from .scorer import HybridRewardScorer

logger = logging.getLogger("hybrid_reward.service")


def _json_response(body: dict, status: int = 200) -> Response:
    return Response(content=dumps(body), status_code=status, media_type="application/json")


def create_app(scorer: Optional[HybridRewardScorer] = None) -> FastAPI:
    scorer = (scorer if scorer is not None else HybridRewardScorer()).fit()
    app = FastAPI(title="hybrid-reward", version=__version__)

    @app.get("/v1/health")
    def health():
        return _json_response({"status": "ok", "version": __version__})

    @app.post("/v1/score")
    async def score(request: Request):
        start = time.perf_counter()
        raw = await request.body()
        try:
            try:
                payload = json.loads(raw)
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise RequestError(INVALID_REQUEST, f"body is not valid JSON: {exc}") from None
            body, result = score_request(payload, scorer)
        except RequestError as exc:
            logger.info(dumps({"event": "score", "error": exc.code, "latency_ms": _ms(start)}))
            return _json_response(exc.to_dict(), HTTP_STATUS[exc.code])
        except Exception as exc:
            logger.exception("scoring failed")
            err = RequestError(INTERNAL, f"{type(exc).__name__}: {exc}")
            return _json_response(err.to_dict(), HTTP_STATUS[INTERNAL])
        logger.info(
            dumps(
                {
                    "event": "score",
                    "request_id": body["request_id"],
                    "task": str(payload["task"]).upper(),
                    "G": len(result.rollouts),
                    "eligible_count": result.eligible_count,
                    "mean_reward": result.mean,
                    "latency_ms": _ms(start),
                }
            )
        )
        return _json_response(body)

    return app


def _ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000.0, 3)


def check_bindable(host: str, port: int) -> None:
    """Raise ``OSError`` if ``host:port`` cannot be bound."""
    family = socket.AF_INET6 if ":" in host else socket.AF_INET
    with socket.socket(family, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, port))


def serve(scorer: Optional[HybridRewardScorer] = None, host: str = "127.0.0.1", port: int = 8080, log_level: str = "info") -> None:
    """Run the service until interrupted. Raises ``OSError`` on bind failure."""
    import uvicorn

    check_bindable(host, port)
    logging.basicConfig(level=log_level.upper(), format="%(message)s")
    uvicorn.run(create_app(scorer), host=host, port=port, log_level=log_level)
