import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from hybrid_reward.boxes import BoundingBox, Detection, TaskType, iou
from hybrid_reward.task_rewards import (
    RewardParams,
    TaskMismatchError,
    match_score,
    match_sets,
    normalize_answer,
    ovd_reward,
    rec_reward,
    route_reward,
    segment_penalty,
    vqa_reward,
)


def det(box, label="ship"):
    return Detection(BoundingBox(*box), label)


def test_iou_examples():
    assert iou(BoundingBox(0, 0, 4, 4), BoundingBox(0, 0, 4, 4)) == 1.0
    assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-12)
    assert iou(BoundingBox(0, 0, 1, 1), BoundingBox(2, 2, 3, 3)) == 0.0
    assert iou(BoundingBox(1, 1, 1, 1), BoundingBox(1, 1, 1, 1)) == 0.0
    assert iou(BoundingBox(0, 0, 1, 1), BoundingBox(0, 0, 0, 5)) == 0.0


coord = st.floats(-100, 100, allow_nan=False)
boxes = st.tuples(coord, coord, coord, coord).map(lambda c: BoundingBox.from_corners(*c))


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0


@pytest.mark.parametrize("overlap, reward", [(0.6, 0.6), (0.5, 0.5), (0.4, 0.32), (0.3, 0.24), (0.29, 0.0), (0.0, 0.0), (1.0, 1.0)])
def test_segment_penalty(overlap, reward):
    assert segment_penalty(overlap) == pytest.approx(reward, abs=1e-12)


@given(st.floats(0, 1), st.floats(0, 1))
def test_segment_penalty_monotone(a, b):
    lo, hi = sorted((a, b))
    assert segment_penalty(lo) <= segment_penalty(hi)


def test_rec_reward_on_boxes():
    gt = BoundingBox(0, 0, 10, 10)
    assert rec_reward(BoundingBox(0, 0, 10, 6), gt) == pytest.approx(0.6)
    assert rec_reward(BoundingBox(0, 0, 10, 4), gt) == pytest.approx(0.32)
    assert rec_reward(BoundingBox(0, 0, 10, 2.9), gt) == 0.0


def test_rec_reward_custom_thresholds():
    p = RewardParams(iou_high=0.7, iou_low=0.2, rec_partial_factor=0.5)
    assert segment_penalty(0.6, p) == pytest.approx(0.3)
    assert segment_penalty(0.19, p) == 0.0


@pytest.mark.parametrize(
    "pbox, plabel, expected",
    [
        ((0, 0, 10, 7), "ship", 1.0),
        ((0, 0, 10, 4), "ship", 0.5),
        ((0, 0, 10, 9), "plane", 0.0),
        ((0, 0, 10, 2), "ship", 0.0),
        ((0, 0, 10, 7), "  SHIP ", 1.0),
    ],
)
def test_match_score(pbox, plabel, expected):
    assert match_score(det(pbox, plabel), det((0, 0, 10, 10))) == expected


def test_match_sets_single_assignment():
    r = match_sets([det((0, 0, 5, 5))], [det((0, 0, 5, 5)), det((20, 20, 30, 30))])
    assert (r.tp_total, r.precision, r.recall) == (1.0, 1.0, 0.5)
    assert r.f1 == pytest.approx(2 / 3)
    assert r.assignments == [(0, 0, 1.0)]


def test_match_sets_duplicates_by_policy():
    preds = [det((0, 0, 5, 5)), det((0, 0, 5, 5))]
    gts = [det((0, 0, 5, 5))]
    as_tuples = [([0, 0, 5, 5], "ship")] * 2
    # frozen from the exhaustive oracle
    assert oracles.exhaustive_tp(as_tuples, [([0, 0, 5, 5], "ship")]) == 1.0
    assert oracles.literal_tp(as_tuples, [([0, 0, 5, 5], "ship")]) == 2.0
    one = match_sets(preds, gts, "one_to_one")
    assert (one.tp_total, one.precision) == (1.0, 0.5)
    lit = match_sets(preds, gts, "literal")
    assert (lit.tp_total, lit.precision) == (2.0, 1.0)


def test_match_sets_empty_predictions():
    r = match_sets([], [det((0, 0, 1, 1))] * 3)
    assert (r.tp_total, r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0, 0.0)


# p1 overlaps g1 at IoU 0.9 and g2 at 1/3; p2 overlaps only g1 (IoU 2/3).
GREEDY_TRAP = (
    [([0, 0, 10, 9], "a"), ([-2, 0, 8, 10], "a")],
    [([0, 0, 10, 10], "a"), ([5, 0, 15, 9], "a")],
)


def test_greedy_is_not_always_optimal():
    preds = [det(b, l) for b, l in GREEDY_TRAP[0]]
    gts = [det(b, l) for b, l in GREEDY_TRAP[1]]
    assert oracles.exhaustive_tp(*GREEDY_TRAP) == 1.5
    assert match_sets(preds, gts, "greedy").tp_total == 1.0
    best = match_sets(preds, gts, "one_to_one")
    assert best.tp_total == 1.5
    assert best.assignments == [(0, 1, 0.5), (1, 0, 1.0)]


def _random_scene(rng, n_max=5):
    def box():
        x, y = rng.uniform(0, 20), rng.uniform(0, 20)
        return [x, y, x + rng.uniform(1, 12), y + rng.uniform(1, 12)]

    preds = [(box(), rng.choice("abc")) for _ in range(rng.randint(0, n_max))]
    gts = [(box(), rng.choice("abc")) for _ in range(rng.randint(0, n_max))]
    return preds, gts


def _dets(items):
    return [Detection(BoundingBox(*b), l) for b, l in items]


@pytest.mark.parametrize("seed", range(5))
def test_match_sets_against_oracles(seed):
    rng = random.Random(seed)
    for _ in range(100):
        preds, gts = _random_scene(rng)
        one = match_sets(_dets(preds), _dets(gts))
        assert one.tp_total == pytest.approx(oracles.exhaustive_tp(preds, gts), abs=1e-12)
        pi = [i for i, _, _ in one.assignments]
        gi = [j for _, j, _ in one.assignments]
        assert len(set(pi)) == len(pi) and len(set(gi)) == len(gi)
        lit = match_sets(_dets(preds), _dets(gts), "literal")
        assert lit.tp_total == pytest.approx(oracles.literal_tp(preds, gts), abs=1e-12)


def test_match_result_invariants():
    rng = random.Random(7)
    for _ in range(200):
        preds, gts = _random_scene(rng)
        r = match_sets(_dets(preds), _dets(gts))
        assert 0 <= r.precision <= 1 and 0 <= r.recall <= 1 and 0 <= r.f1 <= 1
        assert r.tp_total == pytest.approx(sum(s for _, _, s in r.assignments))
        if r.precision + r.recall > 0:
            assert r.f1 == pytest.approx(2 * r.precision * r.recall / (r.precision + r.recall))


def test_ovd_reward_examples():
    assert ovd_reward([det((0, 0, 5, 5))], [det((0, 0, 5, 5))]) == 1.0
    assert ovd_reward([det((0, 0, 10, 4))], [det((0, 0, 10, 10))]) == pytest.approx(0.5)
    assert ovd_reward([], []) == 1.0
    assert ovd_reward([], [det((0, 0, 1, 1))]) == 0.0
    assert ovd_reward([det((0, 0, 1, 1))], []) == 0.0


def test_adding_zero_score_prediction_never_helps():
    rng = random.Random(3)
    for _ in range(200):
        preds, gts = _random_scene(rng)
        if not gts:
            continue
        base = ovd_reward(_dets(preds), _dets(gts))
        junk = Detection(BoundingBox(500, 500, 501, 501), "zzz")
        assert ovd_reward(_dets(preds) + [junk], _dets(gts)) <= base + 1e-12


@pytest.mark.parametrize(
    "raw, norm",
    [("  Yes. ", "yes"), ("Rural Area", "rural area"), ("12", "12"), ("a \t b\n c!", "a b c"), ("what?!", "what"), ("", "")],
)
def test_normalize_answer(raw, norm):
    assert normalize_answer(raw) == norm


@pytest.mark.parametrize("pred, gt, r", [("Yes", "yes", 1.0), ("yes", "no", 0.0), ("", "yes", 0.0)])
def test_vqa_reward(pred, gt, r):
    assert vqa_reward(pred, gt) == r


@given(st.text(max_size=20), st.text(alphabet=" \t\n", max_size=3), st.text(alphabet=" \t\n", max_size=3))
def test_vqa_reward_case_and_whitespace_invariant(text, lead, trail):
    assert vqa_reward(lead + text + trail, text.casefold()) == vqa_reward(text.casefold(), text)


def test_route_reward():
    gt = [0, 0, 10, 10]
    assert route_reward(TaskType.REC, BoundingBox(0, 0, 10, 6), gt) == pytest.approx(0.6)
    assert route_reward("VQA", None, "yes") == 0.0
    gts = [{"bbox": [0, 0, 5, 5], "label": "ship"}]
    assert route_reward("OVD", [det((0, 0, 5, 5))], gts) == 1.0
    # parsed payload of the wrong kind scores zero
    assert route_reward("REC", "yes", gt) == 0.0
    assert route_reward("OVD", BoundingBox(0, 0, 1, 1), gts) == 0.0


@pytest.mark.parametrize("task, gt", [("REC", "yes"), ("VQA", [0, 0, 1, 1]), ("OVD", [0, 0, 1, 1]), ("REC", [{"bbox": [0, 0, 1, 1], "label": "x"}])])
def test_route_reward_task_mismatch(task, gt):
    with pytest.raises(TaskMismatchError):
        route_reward(task, None, gt)
