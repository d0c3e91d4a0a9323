"""Input validation helpers shared by the loaders, the service and the estimators.

All helpers raise :class:`ValueError` (or :class:`TypeError` for wrong
container types) with a message naming the offending field.
"""

from __future__ import annotations

import math
from numbers import Real
from typing import Any, Sequence

from ..boxes import BoundingBox, Detection, TaskType


def check_number(value: Any, name: str = "value") -> float:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise TypeError(f"{name} must be a number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


def check_non_negative(value: Any, name: str = "value") -> float:
    value = check_number(value, name)
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


def check_box(value: Any, name: str = "bbox") -> BoundingBox:
    """Turn a 4-element ``[x1, y1, x2, y2]`` sequence into a :class:`BoundingBox`.

    Corners are reordered so that ``x1 <= x2`` and ``y1 <= y2``.
    """
    if isinstance(value, BoundingBox):
        return value
    if isinstance(value, (str, bytes)) or not isinstance(value, Sequence):
        raise TypeError(f"{name} must be a list of 4 numbers")
    if len(value) != 4:
        raise ValueError(f"{name} must have exactly 4 numbers, got {len(value)}")
    coords = [check_number(v, f"{name}[{i}]") for i, v in enumerate(value)]
    return BoundingBox.from_corners(*coords)


def check_detection(value: Any, name: str = "detection") -> Detection:
    if isinstance(value, Detection):
        return value
    if not isinstance(value, dict):
        raise TypeError(f"{name} must be an object with 'bbox' and 'label'")
    if "bbox" not in value:
        raise ValueError(f"{name} is missing 'bbox'")
    if "label" not in value:
        raise ValueError(f"{name} is missing 'label'")
    label = value["label"]
    if not isinstance(label, str) or not label.strip():
        raise ValueError(f"{name}.label must be a non-empty string")
    return Detection(check_box(value["bbox"], f"{name}.bbox"), label)


def check_detections(value: Any, name: str = "detections") -> list[Detection]:
    if isinstance(value, (str, bytes, dict)) or not isinstance(value, Sequence):
        raise TypeError(f"{name} must be a list of detections")
    return [check_detection(v, f"{name}[{i}]") for i, v in enumerate(value)]


def check_ground_truth(task: TaskType | str, value: Any):
    """Validate a ground-truth payload against its task.

    Returns a ``BoundingBox`` (REC), a list of ``Detection`` (OVD) or ``str`` (VQA).
    """
    task = TaskType.coerce(task)
    if task is TaskType.REC:
        return check_box(value, "ground_truth")
    if task is TaskType.OVD:
        return check_detections(value, "ground_truth")
    if not isinstance(value, str):
        raise TypeError("ground_truth for VQA must be a string")
    return value


def check_choice(value: Any, choices: Sequence[str], name: str) -> str:
    if value not in choices:
        raise ValueError(f"{name} must be one of {list(choices)}, got {value!r}")
    return value
