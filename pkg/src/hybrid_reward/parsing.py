"""Section extraction, format checking and answer parsing for raw rollout text.

A rollout is expected to look like::

    <think> ...reasoning... </think><answer> ...payload... </answer>

The answer payload is a bracketed box for REC, a JSON list of
``{"bbox": [...], "label": ...}`` objects for OVD and free text for VQA.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from .boxes import BoundingBox, Detection, TaskType
from .utils.validation import check_detection

_DELIM = r"</?(?:think|answer)>"
_BODY = rf"(?:(?!{_DELIM}).)*"

_SECTION_RE = {
    tag: re.compile(rf"<{tag}>({_BODY})</{tag}>", re.DOTALL) for tag in ("think", "answer")
}
_STRICT_FORMAT_RE = re.compile(
    rf"\s*<think>({_BODY})</think>\s*<answer>({_BODY})</answer>\s*", re.DOTALL
)
_DELIM_RE = re.compile(_DELIM)

_NUM = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?"
_BOX_RE = re.compile(rf"\[\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*\]")


class AnswerParseError(ValueError):
    """The answer section carries no usable payload for its task."""


def extract_sections(raw_text: str) -> tuple[Optional[str], Optional[str]]:
    """Return ``(think, answer)`` contents; a section is ``None`` when no clean pair exists.

    A clean pair is an opening tag followed by its closing tag with no tag
    delimiter of either kind in between, so nested or unclosed tags do not
    produce a section.
    """
    think = _SECTION_RE["think"].search(raw_text)
    answer = _SECTION_RE["answer"].search(raw_text)
    return (think.group(1) if think else None, answer.group(1) if answer else None)


def format_reward(raw_text: str, strict: bool = True) -> int:
    """Binary reward for the ``<think>..</think><answer>..</answer>`` layout.

    Both variants require exactly one pair of each tag, think before answer,
    and non-blank contents. ``strict`` additionally rejects any
    non-whitespace text outside the two pairs.
    """
    if strict:
        m = _STRICT_FORMAT_RE.fullmatch(raw_text)
        if m is None:
            return 0
        return int(bool(m.group(1).strip()) and bool(m.group(2).strip()))

    delims = [m.group(0) for m in _DELIM_RE.finditer(raw_text)]
    if delims != ["<think>", "</think>", "<answer>", "</answer>"]:
        return 0
    think, answer = extract_sections(raw_text)
    return int(bool(think and think.strip()) and bool(answer and answer.strip()))


@dataclass(frozen=True)
class RolloutRecord:
    raw_text: str
    think_text: Optional[str]
    answer_text: Optional[str]
    format_valid: bool

    @classmethod
    def from_text(cls, raw_text: str, strict: bool = True) -> "RolloutRecord":
        think, answer = extract_sections(raw_text)
        return cls(raw_text, think, answer, bool(format_reward(raw_text, strict=strict)))


def parse_rec_answer(answer: str) -> BoundingBox:
    """First bracketed group of four numbers, with corners reordered."""
    m = _BOX_RE.search(answer)
    if m is None:
        raise AnswerParseError("no [x1, y1, x2, y2] group in answer")
    try:
        return BoundingBox.from_corners(*(float(g) for g in m.groups()))
    except ValueError as exc:  # overflow to inf
        raise AnswerParseError(str(exc)) from None


def _load_json_list(answer: str):
    text = answer.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    start, end = text.find("["), text.rfind("]")
    if start == -1 or end <= start:
        raise AnswerParseError("answer holds no JSON list")
    try:
        return json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise AnswerParseError(f"malformed detection list: {exc}") from None


def parse_ovd_answer(answer: str) -> list[Detection]:
    """Parse a JSON list of ``{"bbox": [x1, y1, x2, y2], "label": str}`` objects.

    ``bbox_2d`` is accepted as an alias of ``bbox``. An empty list is valid.
    """
    items = _load_json_list(answer)
    if not isinstance(items, list):
        raise AnswerParseError("detections must be a JSON list")
    dets = []
    for i, item in enumerate(items):
        if isinstance(item, dict) and "bbox" not in item and "bbox_2d" in item:
            item = {**item, "bbox": item["bbox_2d"]}
        try:
            dets.append(check_detection(item, f"detection[{i}]"))
        except (TypeError, ValueError) as exc:
            raise AnswerParseError(str(exc)) from None
    return dets


def parse_vqa_answer(answer: str) -> str:
    return answer


def parse_answer(task: TaskType | str, answer: Optional[str]):
    """Dispatch to the task parser; returns ``None`` on any parse failure."""
    if answer is None:
        return None
    task = TaskType.coerce(task)
    try:
        if task is TaskType.REC:
            return parse_rec_answer(answer)
        if task is TaskType.OVD:
            return parse_ovd_answer(answer)
        return parse_vqa_answer(answer)
    except AnswerParseError:
        return None
