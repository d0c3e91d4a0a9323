from .validation import (
    check_box,
    check_choice,
    check_detection,
    check_detections,
    check_ground_truth,
    check_non_negative,
    check_number,
)

__all__ = [
    "check_box",
    "check_choice",
    "check_detection",
    "check_detections",
    "check_ground_truth",
    "check_non_negative",
    "check_number",
]
