"""Wire format of the scoring service and the offline ``score`` command.

Request::

    {"request_id": "q1", "task": "REC", "query": "...",
     "ground_truth": [x1, y1, x2, y2],
     "rollouts": ["<think>..</think><answer>..</answer>", ...],
     "weights": {"lambda_srar": 0.1, "lambda_rpcr": 0.7, "lambda_evol": 0.2},
     "grpo": {"epsilon_std": 1e-8},
     "matching": "one_to_one"}

``query``, ``weights``, ``grpo`` and ``matching`` are optional. Errors are
returned as ``{"error": {"code": ..., "message": ...}}``.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from sklearn.base import clone

from .boxes import TaskType
from .grpo import GrpoConfig, RewardWeights
from .scorer import GroupResult, HybridRewardScorer
from .task_rewards import MatchingPolicy, TaskMismatchError

INVALID_REQUEST = "INVALID_REQUEST"
TASK_MISMATCH = "TASK_MISMATCH"
INTERNAL = "INTERNAL"

HTTP_STATUS = {INVALID_REQUEST: 400, TASK_MISMATCH: 422, INTERNAL: 500}

_REQUEST_KEYS = {"request_id", "task", "query", "ground_truth", "rollouts", "weights", "grpo", "matching"}


class RequestError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def to_dict(self) -> dict:
        return {"error": {"code": self.code, "message": self.message}}


def dumps(obj: Any) -> str:
    """Canonical JSON used for every response body and output line."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _scorer_for(req: dict, base: HybridRewardScorer) -> HybridRewardScorer:
    overrides = {}
    weights = req.get("weights")
    if weights is not None:
        if not isinstance(weights, dict) or set(weights) - {"lambda_srar", "lambda_rpcr", "lambda_evol"}:
            raise RequestError(INVALID_REQUEST, "weights must be an object with lambda_srar, lambda_rpcr, lambda_evol")
        merged = {"lambda_srar": base.lambda_srar, "lambda_rpcr": base.lambda_rpcr, "lambda_evol": base.lambda_evol, **weights}
        try:
            RewardWeights(**merged)
        except (TypeError, ValueError) as exc:
            raise RequestError(INVALID_REQUEST, f"bad weights: {exc}") from None
        overrides.update(merged)
    grpo = req.get("grpo")
    if grpo is not None:
        if not isinstance(grpo, dict):
            raise RequestError(INVALID_REQUEST, "grpo must be an object")
        try:
            cfg = GrpoConfig(**{"epsilon_std": base.epsilon_std, **grpo})
        except (TypeError, ValueError) as exc:
            raise RequestError(INVALID_REQUEST, f"bad grpo config: {exc}") from None
        overrides["epsilon_std"] = cfg.epsilon_std
    matching = req.get("matching")
    if matching is not None:
        try:
            overrides["matching"] = MatchingPolicy.coerce(matching).value
        except ValueError:
            raise RequestError(INVALID_REQUEST, f"unknown matching policy {matching!r}") from None
    if not overrides:
        return base
    return clone(base, safe=False).set_params(**overrides)


def parse_request(req: Any) -> tuple[str, TaskType, list[str]]:
    if not isinstance(req, dict):
        raise RequestError(INVALID_REQUEST, "request body must be a JSON object")
    unknown = set(req) - _REQUEST_KEYS
    if unknown:
        raise RequestError(INVALID_REQUEST, f"unknown fields: {sorted(unknown)}")
    request_id = req.get("request_id")
    if not isinstance(request_id, str) or not request_id:
        raise RequestError(INVALID_REQUEST, "request_id must be a non-empty string")
    try:
        task = TaskType.coerce(req.get("task"))
    except ValueError as exc:
        raise RequestError(INVALID_REQUEST, str(exc)) from None
    if "ground_truth" not in req:
        raise RequestError(INVALID_REQUEST, "ground_truth is required")
    query = req.get("query")
    if query is not None and not isinstance(query, str):
        raise RequestError(INVALID_REQUEST, "query must be a string")
    rollouts = req.get("rollouts")
    if not isinstance(rollouts, list) or not rollouts:
        raise RequestError(INVALID_REQUEST, "rollouts must be a non-empty list of strings")
    if not all(isinstance(r, str) for r in rollouts):
        raise RequestError(INVALID_REQUEST, "rollouts must be a non-empty list of strings")
    return request_id, task, rollouts


def response_dict(request_id: str, result: GroupResult) -> dict:
    return {
        "request_id": request_id,
        "per_rollout": [r.to_dict() for r in result.rollouts],
        "group": {"mean": result.mean, "std": result.std, "eligible_count": result.eligible_count},
    }


def score_request(req: Any, base: Optional[HybridRewardScorer] = None) -> tuple[dict, GroupResult]:
    """Validate and score a request; raises :class:`RequestError`."""
    base = base if base is not None else HybridRewardScorer().fit()
    request_id, task, rollouts = parse_request(req)
    scorer = _scorer_for(req, base)
    try:
        result = scorer.score_group(rollouts, task, req["ground_truth"])
    except TaskMismatchError as exc:
        raise RequestError(TASK_MISMATCH, str(exc)) from None
    return response_dict(request_id, result), result


def handle_score(req: Any, base: Optional[HybridRewardScorer] = None) -> dict:
    """Score a request, turning every failure into an error body."""
    try:
        return score_request(req, base)[0]
    except RequestError as exc:
        return exc.to_dict()
    except Exception as exc:  # never let a request take the process down
        return RequestError(INTERNAL, f"{type(exc).__name__}: {exc}").to_dict()
