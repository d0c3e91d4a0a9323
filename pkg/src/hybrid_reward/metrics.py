"""Benchmark metrics over prediction/ground-truth records.

* REC: ``Acc@t``, the percentage of records whose predicted box has IoU
  strictly above ``t`` with the ground truth.
* OVD: COCO-style mAP with 101-point interpolated precision. Detections
  carry no confidence, so a detection's position in its record's list is
  its rank (earlier = more confident).
* VQA: Pass@1, the percentage of exact matches after normalisation.

Record files hold one JSON object per line::

    {"id": "a1", "task": "REC", "pred": [x1, y1, x2, y2] | null, "gt": [x1, y1, x2, y2]}
    {"id": "b1", "task": "OVD", "pred": [{"bbox": [...], "label": "ship"}] | null, "gt": [...]}
    {"id": "c1", "task": "VQA", "pred": "yes" | null, "gt": "no"}

A ``null`` prediction is a parse failure and counts as a miss.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .boxes import BoundingBox, Detection, TaskType, iou
from .task_rewards import vqa_reward
from .utils.validation import check_box, check_detections, check_ground_truth

logger = logging.getLogger(__name__)

COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
DEFAULT_ACC_THRESHOLDS = (0.5, 0.7)


class EvalFileError(ValueError):
    pass


@dataclass(frozen=True)
class EvalRecord:
    id: str
    task: TaskType
    prediction: Any
    ground_truth: Any

    @classmethod
    def from_dict(cls, data: dict) -> "EvalRecord":
        if not isinstance(data, dict):
            raise ValueError("record must be a JSON object")
        missing = {"id", "task", "pred", "gt"} - set(data)
        if missing:
            raise ValueError(f"missing fields {sorted(missing)}")
        rid = data["id"]
        if not isinstance(rid, str) or not rid:
            raise ValueError("id must be a non-empty string")
        task = TaskType.coerce(data["task"])
        gt = check_ground_truth(task, data["gt"])
        pred = data["pred"]
        if pred is not None:
            if task is TaskType.REC:
                pred = check_box(pred, "pred")
            elif task is TaskType.OVD:
                pred = check_detections(pred, "pred")
            elif not isinstance(pred, str):
                raise TypeError("pred for VQA must be a string or null")
        return cls(rid, task, pred, gt)

    def to_dict(self) -> dict:
        return {"id": self.id, "task": self.task.value, "pred": _payload(self.prediction), "gt": _payload(self.ground_truth)}


def _payload(value):
    if isinstance(value, BoundingBox):
        return value.to_list()
    if isinstance(value, list):
        return [d.to_dict() for d in value]
    return value


def load_eval_file(path: str | Path, strict: bool = False) -> list[EvalRecord]:
    """Read a record file.

    Blank lines are ignored. In strict mode the first malformed line or
    duplicate id raises :class:`EvalFileError`; otherwise such lines are
    logged with their line number and skipped.
    """
    path = Path(path)
    records: list[EvalRecord] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = EvalRecord.from_dict(json.loads(line))
                if rec.id in seen:
                    raise ValueError(f"duplicate id {rec.id!r}")
            except (ValueError, TypeError) as exc:
                msg = f"{path}:{lineno}: {exc}"
                if strict:
                    raise EvalFileError(msg) from None
                logger.warning("skipping %s", msg)
                continue
            seen.add(rec.id)
            records.append(rec)
    return records


def _require(records: Sequence[EvalRecord], task: TaskType) -> None:
    wrong = [r.id for r in records if r.task is not task]
    if wrong:
        raise ValueError(f"{len(wrong)} record(s) are not {task.value}, e.g. {wrong[0]!r}")


def acc_at_t(records: Sequence[EvalRecord], t: float) -> float:
    _require(records, TaskType.REC)
    if not records:
        return 0.0
    hits = sum(1 for r in records if r.prediction is not None and iou(r.prediction, r.ground_truth) > t)
    return 100.0 * hits / len(records)


def pass_at_1(records: Sequence[EvalRecord]) -> float:
    _require(records, TaskType.VQA)
    if not records:
        return 0.0
    hits = sum(1 for r in records if r.prediction is not None and vqa_reward(r.prediction, r.ground_truth) == 1.0)
    return 100.0 * hits / len(records)


def _interpolated_ap(tp: np.ndarray, n_gt: int) -> float:
    """101-point interpolated AP from a ranked TP/FP vector."""
    if tp.size == 0:
        return 0.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    recall = ctp / n_gt
    precision = ctp / (ctp + cfp)
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    # tolerance keeps recall k/n from missing the grid point it equals
    idx = np.searchsorted(recall, RECALL_POINTS - 1e-12, side="left")
    q = np.where(idx < precision.size, precision[np.minimum(idx, precision.size - 1)], 0.0)
    return float(q.mean())


def _ranked_hits(scenes, category: str, threshold: float) -> tuple[np.ndarray, int]:
    ranked = []
    n_gt = 0
    gt_by_scene = []
    for s, (preds, gts) in enumerate(scenes):
        cat_gts = [g.box for g in gts if g.key == category]
        gt_by_scene.append(cat_gts)
        n_gt += len(cat_gts)
        ranked.extend((rank, s, p.box) for rank, p in enumerate(preds) if p.key == category)
    ranked.sort(key=lambda x: (x[0], x[1]))

    matched = [np.zeros(len(g), dtype=bool) for g in gt_by_scene]
    tp = np.zeros(len(ranked))
    for k, (_, s, box) in enumerate(ranked):
        best, best_j = -1.0, -1
        for j, gbox in enumerate(gt_by_scene[s]):
            if matched[s][j]:
                continue
            o = iou(box, gbox)
            if o >= threshold and o > best:
                best, best_j = o, j
        if best_j >= 0:
            matched[s][best_j] = True
            tp[k] = 1.0
    return tp, n_gt


def average_precision(
    scenes: Sequence[tuple[Sequence[Detection], Sequence[Detection]]],
    thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
) -> dict[str, list[float]]:
    """Per-category AP at each threshold, for categories present in the ground truth."""
    categories = sorted({g.key for _, gts in scenes for g in gts})
    table = {}
    for cat in categories:
        row = []
        for t in thresholds:
            tp, n_gt = _ranked_hits(scenes, cat, t)
            row.append(_interpolated_ap(tp, n_gt))
        table[cat] = row
    return table


def _threshold_key(t: float) -> str:
    return f"{t:g}"


def coco_map(records: Sequence[EvalRecord], thresholds: Sequence[float] = COCO_IOU_THRESHOLDS) -> dict[str, float]:
    """mAP per IoU threshold plus the mean over all thresholds.

    Keys are the thresholds (``"0.5"``, ``"0.55"``, ...) and, when more than
    one threshold is given, ``"lo:hi"`` for the average (``"0.5:0.95"`` by
    default). Categories absent from every ground truth are left out; with
    no ground-truth objects at all every value is 0.
    """
    _require(records, TaskType.OVD)
    thresholds = [float(t) for t in thresholds]
    scenes = [(r.prediction or [], r.ground_truth) for r in records]
    table = average_precision(scenes, thresholds)
    if table:
        per_t = np.mean(np.array(list(table.values())), axis=0)
    else:
        per_t = np.zeros(len(thresholds))
    out = {_threshold_key(t): float(v) for t, v in zip(thresholds, per_t)}
    if len(thresholds) > 1:
        out[f"{_threshold_key(min(thresholds))}:{_threshold_key(max(thresholds))}"] = float(per_t.mean())
    return out


@dataclass
class MetricReport:
    task: TaskType
    n_items: int
    acc_at: dict[str, float] = field(default_factory=dict)
    map_values: dict[str, float] = field(default_factory=dict)
    pass_at_1: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"task": self.task.value, "n_items": self.n_items}
        if self.task is TaskType.REC:
            out["acc_at"] = self.acc_at
        elif self.task is TaskType.OVD:
            out["map"] = self.map_values
        else:
            out["pass_at_1"] = self.pass_at_1
        return out

    def rows(self) -> list[tuple[str, str]]:
        if self.task is TaskType.REC:
            return [(f"Acc@{k}", f"{v:.2f}") for k, v in self.acc_at.items()]
        if self.task is TaskType.OVD:
            return [(f"mAP@{k}" if ":" not in k else f"mAP@[{k}]", f"{v:.4f}") for k, v in self.map_values.items()]
        return [("Pass@1", f"{self.pass_at_1:.2f}")]


def evaluate(
    records: Sequence[EvalRecord],
    task: TaskType | str | None = None,
    acc_thresholds: Iterable[float] = DEFAULT_ACC_THRESHOLDS,
    map_thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
) -> list[MetricReport]:
    """One report per task present (or for ``task`` only, which every record must match)."""
    if task is not None:
        task = TaskType.coerce(task)
        _require(records, task)
        tasks = [task]
    else:
        tasks = [t for t in TaskType if any(r.task is t for r in records)]

    reports = []
    for t in tasks:
        subset = [r for r in records if r.task is t]
        rep = MetricReport(t, len(subset))
        if t is TaskType.REC:
            rep.acc_at = {_threshold_key(th): acc_at_t(subset, th) for th in acc_thresholds}
        elif t is TaskType.OVD:
            rep.map_values = coco_map(subset, map_thresholds)
        else:
            rep.pass_at_1 = pass_at_1(subset)
        reports.append(rep)
    return reports


def format_table(reports: Sequence[MetricReport]) -> str:
    rows = [("task", "metric", "value")]
    for rep in reports:
        rows.extend((rep.task.value, name, value) for name, value in rep.rows())
        rows.append((rep.task.value, "n_items", str(rep.n_items)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = [f"{a:<{widths[0]}}  {b:<{widths[1]}}  {c:>{widths[2]}}" for a, b, c in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
