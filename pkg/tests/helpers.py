"""Random request and scene generators shared by the test modules."""

import json
import random

THINKS = [
    "scan the whole image for ships",
    "look at the harbor edge then the pier",
    "count the vehicles along the road",
    "the runway holds two airplanes",
    "check the top left corner first",
]
LABELS = ["ship", "plane", "car"]


def _box(rng):
    x, y = rng.randint(0, 40), rng.randint(0, 40)
    return [x, y, x + rng.randint(2, 30), y + rng.randint(2, 30)]


def _near(rng, box):
    return [box[0] + rng.randint(-3, 3), box[1] + rng.randint(-3, 3), box[2] + rng.randint(-3, 3), box[3] + rng.randint(-3, 3)]


def random_answer(rng, task, gt):
    if task == "REC":
        box = _near(rng, gt) if rng.random() < 0.7 else _box(rng)
        return f"[{box[0]}, {box[1]}, {box[2]}, {box[3]}]"
    if task == "OVD":
        dets = [{"bbox": _near(rng, g["bbox"]), "label": g["label"]} for g in gt if rng.random() < 0.7]
        dets += [{"bbox": _box(rng), "label": rng.choice(LABELS)} for _ in range(rng.randint(0, 2))]
        return json.dumps(dets)
    return rng.choice([gt, gt.upper() + ".", "maybe", "no"])


def random_rollout(rng, task, gt):
    answer = random_answer(rng, task, gt)
    roll = rng.random()
    if roll < 0.1:
        return f"{answer}"
    if roll < 0.15:
        return f"<answer>{answer}</answer><think>x</think>"
    return f"<think>{rng.choice(THINKS)}</think><answer>{answer}</answer>"


def random_request(rng: random.Random, rid: str, g_max: int = 6) -> dict:
    task = rng.choice(["REC", "OVD", "VQA"])
    if task == "REC":
        gt = _box(rng)
    elif task == "OVD":
        gt = [{"bbox": _box(rng), "label": rng.choice(LABELS)} for _ in range(rng.randint(0, 3))]
    else:
        gt = rng.choice(["yes", "no", "two", "harbor"])
    rollouts = [random_rollout(rng, task, gt) for _ in range(rng.randint(1, g_max))]
    return {"request_id": rid, "task": task, "ground_truth": gt, "rollouts": rollouts}
