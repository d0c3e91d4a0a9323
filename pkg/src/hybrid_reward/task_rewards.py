"""Task-specific correctness rewards for REC, OVD and VQA, plus task routing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .boxes import BoundingBox, Detection, TaskType, iou
from .utils.validation import check_ground_truth

# Defaults for the piecewise REC reward and the OVD match score.
IOU_HIGH = 0.5
IOU_LOW = 0.3
REC_PARTIAL_FACTOR = 0.8
SOFT_MATCH_SCORE = 0.5


class MatchingPolicy(str, Enum):
    ONE_TO_ONE = "one_to_one"
    GREEDY = "greedy"
    LITERAL_PER_PRED = "literal"

    @classmethod
    def coerce(cls, value: "MatchingPolicy | str") -> "MatchingPolicy":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class RewardParams:
    """Thresholds for the REC and OVD correctness rewards."""

    iou_high: float = IOU_HIGH
    iou_low: float = IOU_LOW
    rec_partial_factor: float = REC_PARTIAL_FACTOR
    soft_match_score: float = SOFT_MATCH_SCORE
    matching: MatchingPolicy = MatchingPolicy.ONE_TO_ONE

    def __post_init__(self):
        if not 0.0 <= self.iou_low <= self.iou_high <= 1.0:
            raise ValueError("need 0 <= iou_low <= iou_high <= 1")
        object.__setattr__(self, "matching", MatchingPolicy.coerce(self.matching))


DEFAULT_PARAMS = RewardParams()


@dataclass
class MatchResult:
    assignments: list[tuple[int, int, float]] = field(default_factory=list)
    tp_total: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0


def segment_penalty(overlap: float, params: RewardParams = DEFAULT_PARAMS) -> float:
    """Map an IoU value onto the piecewise REC reward."""
    if overlap >= params.iou_high:
        return overlap
    if overlap >= params.iou_low:
        return params.rec_partial_factor * overlap
    return 0.0


def rec_reward(pred: BoundingBox, gt: BoundingBox, params: RewardParams = DEFAULT_PARAMS) -> float:
    return segment_penalty(iou(pred, gt), params)


def _score_from_iou(same_label: bool, overlap: float, params: RewardParams) -> float:
    if not same_label:
        return 0.0
    if overlap >= params.iou_high:
        return 1.0
    if overlap >= params.iou_low:
        return params.soft_match_score
    return 0.0


def match_score(p: Detection, g: Detection, params: RewardParams = DEFAULT_PARAMS) -> float:
    """1.0 for a label match with IoU >= 0.5, 0.5 for a soft match, else 0."""
    return _score_from_iou(p.key == g.key, iou(p.box, g.box), params)


def _pairwise(preds, gts, params):
    scores = np.zeros((len(preds), len(gts)))
    overlaps = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            overlaps[i, j] = iou(p.box, g.box)
            scores[i, j] = _score_from_iou(p.key == g.key, overlaps[i, j], params)
    return scores, overlaps


def _greedy(scores, overlaps):
    order = sorted(
        ((i, j) for i in range(scores.shape[0]) for j in range(scores.shape[1]) if scores[i, j] > 0),
        key=lambda ij: (-scores[ij], -overlaps[ij], ij[0], ij[1]),
    )
    used_p, used_g, out = set(), set(), []
    for i, j in order:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        out.append((i, j, float(scores[i, j])))
    return out


def _optimal(scores, overlaps):
    # Lexicographic objective: total match score first, total IoU second.
    # Summed IoU never exceeds min(n, m), so the scale keeps the score term dominant.
    scale = min(scores.shape) + 1.0
    weight = scores * 2.0 * scale + np.where(scores > 0, overlaps, 0.0)
    rows, cols = linear_sum_assignment(weight, maximize=True)
    out = [(int(i), int(j), float(scores[i, j])) for i, j in zip(rows, cols) if scores[i, j] > 0]
    return sorted(out)


def match_sets(
    preds: Sequence[Detection],
    gts: Sequence[Detection],
    policy: MatchingPolicy | str | None = None,
    params: RewardParams = DEFAULT_PARAMS,
) -> MatchResult:
    """Match predicted detections to ground truth and summarise as precision/recall/F1.

    Policies
    --------
    one_to_one
        Maximum total match score over one-to-one assignments (ties broken
        towards larger summed IoU). Solved exactly as an assignment problem.
    greedy
        One-to-one, picking pairs in descending ``(score, IoU)`` order with
        ties on lower prediction index then lower ground-truth index.
        Not always optimal.
    literal
        Each prediction contributes its best score over all ground truths,
        with no exclusivity; duplicate predictions are all credited.
    """
    policy = MatchingPolicy.coerce(policy if policy is not None else params.matching)
    if not preds or not gts:
        return MatchResult()
    scores, overlaps = _pairwise(preds, gts, params)
    if policy is MatchingPolicy.LITERAL_PER_PRED:
        best = scores.argmax(axis=1)
        assignments = [(i, int(j), float(scores[i, j])) for i, j in enumerate(best) if scores[i, j] > 0]
    elif policy is MatchingPolicy.GREEDY:
        assignments = _greedy(scores, overlaps)
    else:
        assignments = _optimal(scores, overlaps)

    tp = float(sum(s for _, _, s in assignments))
    precision = tp / len(preds)
    recall = tp / len(gts)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MatchResult(assignments, tp, precision, recall, f1)


def ovd_reward(
    preds: Sequence[Detection],
    gts: Sequence[Detection],
    policy: MatchingPolicy | str | None = None,
    params: RewardParams = DEFAULT_PARAMS,
) -> float:
    """F1 of the matched sets; two empty sets agree perfectly and score 1.0."""
    if not preds and not gts:
        return 1.0
    return match_sets(preds, gts, policy, params).f1


_WS_RE = re.compile(r"\s+")


def normalize_answer(a: str) -> str:
    """Case-fold, trim, collapse whitespace and drop trailing ``.``, ``!`` or ``?``."""
    a = _WS_RE.sub(" ", a.casefold()).strip()
    return a.rstrip(".!?").rstrip()


def vqa_reward(pred: str, gt: str) -> float:
    return 1.0 if normalize_answer(pred) == normalize_answer(gt) else 0.0


class TaskMismatchError(ValueError):
    """Ground-truth payload does not fit the declared task."""


ParsedAnswer = Union[BoundingBox, list, str]


def route_reward(
    task: TaskType | str,
    parsed: Optional[ParsedAnswer],
    gt,
    params: RewardParams = DEFAULT_PARAMS,
) -> float:
    """Correctness reward dispatched on task type.

    ``parsed`` is ``None`` for a parse failure, which scores 0, as does a
    parsed payload of the wrong kind. A ground truth that does not fit the
    task raises :class:`TaskMismatchError`.
    """
    task = TaskType.coerce(task)
    try:
        gt = check_ground_truth(task, gt)
    except (TypeError, ValueError) as exc:
        raise TaskMismatchError(f"ground truth does not fit task {task.value}: {exc}") from None

    if task is TaskType.REC:
        return rec_reward(parsed, gt, params) if isinstance(parsed, BoundingBox) else 0.0
    if task is TaskType.OVD:
        if not isinstance(parsed, list) or not all(isinstance(d, Detection) for d in parsed):
            return 0.0
        return ovd_reward(parsed, gt, params=params)
    return vqa_reward(parsed, gt) if isinstance(parsed, str) else 0.0
