"""Axis-aligned boxes, labelled detections and intersection-over-union."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class TaskType(str, Enum):
    REC = "REC"
    OVD = "OVD"
    VQA = "VQA"

    @classmethod
    def coerce(cls, value: "TaskType | str") -> "TaskType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown task type {value!r}; expected one of REC, OVD, VQA") from None


@dataclass(frozen=True)
class BoundingBox:
    """Box in pixel coordinates, ``x1 <= x2`` and ``y1 <= y2``."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"box corners out of order: {coords}; use BoundingBox.from_corners")

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BoundingBox":
        """Build a box from two arbitrary corners, reordering coordinates."""
        x1, y1, x2, y2 = (float(v) for v in (x1, y1, x2, y2))
        return cls(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def to_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


def _canonical_label(label: str) -> str:
    return label.strip().casefold()


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    label: str

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label.strip():
            raise ValueError("detection label must be a non-empty string")

    @property
    def key(self) -> str:
        """Label used for equality tests (trimmed, case-folded)."""
        return _canonical_label(self.label)

    def to_dict(self) -> dict:
        return {"bbox": self.box.to_list(), "label": self.label}


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area; 0 when the union is empty."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)
