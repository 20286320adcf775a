import json
import random

import numpy as np
import pytest

import oracle
from layoutsearch.projection import Box2D, ReferenceLayout
from layoutsearch.query import parse_dsl
from layoutsearch.retrieval import (
    DetectionSet, MatchConfig, baseline_histogram, greedy_assignment, ground_truth_ranks, iou,
    load_detections, match_layout, median_rank, rank_baseline, rank_database, recall_at_k,
    score_image,
)


def box(x0, y0, x1, y1, cat="chair", conf=1.0):
    return Box2D(x0, y0, x1, y1, cat, conf)


def test_iou_examples():
    a = box(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, box(20, 20, 30, 30)) == 0.0
    assert iou(a, box(5, 0, 15, 10)) == pytest.approx(1 / 3)
    assert iou(a, box(10, 0, 20, 10)) == 0.0


def test_iou_symmetric_and_bounded():
    rng = random.Random(0)
    for _ in range(300):
        a = box(*sorted_box(rng))
        b = box(*sorted_box(rng))
        assert iou(a, b) == pytest.approx(iou(b, a))
        assert 0.0 <= iou(a, b) <= 1.0


def sorted_box(rng, size=100):
    x0, y0 = rng.uniform(0, size), rng.uniform(0, size)
    return x0, y0, x0 + rng.uniform(1, size), y0 + rng.uniform(1, size)


def test_single_identical_box_soft():
    ref = ReferenceLayout((box(100, 100, 200, 200),))
    det = DetectionSet("a", (box(100, 100, 200, 200, conf=0.9),))
    m = match_layout(ref, det, MatchConfig(mode="soft"))
    assert m.score == pytest.approx(0.9)
    assert m.scale == 1.0 and m.translation == (0.0, 0.0)
    assert m.assignment == (0,)


def test_disjoint_categories_and_empty():
    ref = ReferenceLayout((box(100, 100, 200, 200, "bed"),))
    assert match_layout(ref, DetectionSet("a", (box(100, 100, 200, 200, "sofa"),))).score == 0
    m = match_layout(ref, DetectionSet("b", ()))
    assert m.score == 0 and m.assignment == (None,)


def test_hard_mode_threshold_and_weight():
    ref = ReferenceLayout((box(100, 100, 200, 200),))
    weak = DetectionSet("a", (box(100, 100, 200, 200, conf=0.4),))
    strong = DetectionSet("b", (box(100, 100, 200, 200, conf=0.6),))
    hard = MatchConfig(mode="hard")
    assert match_layout(ref, weak, hard).score == 0
    assert match_layout(ref, strong, hard).score == pytest.approx(1.0)


def test_soft_equals_hard_at_full_confidence():
    rng = random.Random(5)
    for _ in range(10):
        ref = ReferenceLayout(tuple(box(*sorted_box(rng, 200), rng.choice("ab")) for _ in range(3)))
        det = DetectionSet("d", tuple(box(*sorted_box(rng, 200), rng.choice("ab")) for _ in range(3)))
        cfg = dict(stride=20)
        s = match_layout(ref, det, MatchConfig(mode="soft", **cfg)).score
        h = match_layout(ref, det, MatchConfig(mode="hard", **cfg)).score
        assert s == pytest.approx(h)


def test_assignment_respects_categories():
    ref = ReferenceLayout((box(0, 0, 100, 100, "a"), box(200, 0, 300, 100, "b")))
    det = DetectionSet("d", (box(200, 0, 300, 100, "b"), box(0, 0, 100, 100, "a")))
    m = match_layout(ref, det)
    assert m.assignment == (1, 0)
    assert m.score == pytest.approx(2.0)


def test_scale_invariance():
    ref = ReferenceLayout((box(100, 100, 200, 200, "a"), box(300, 150, 420, 260, "b")))
    det = DetectionSet("d", (box(100, 100, 200, 200, "a", 0.8), box(300, 150, 420, 260, "b", 0.7)),
                       640, 480)
    big = DetectionSet("d", tuple(Box2D(b.x_min * 2, b.y_min * 2, b.x_max * 2, b.y_max * 2,
                                        b.category, b.confidence) for b in det.boxes), 1280, 960)
    assert match_layout(ref, big).score == pytest.approx(match_layout(ref, det).score, abs=0.05)


def test_greedy_tie_breaking():
    score, assign = greedy_assignment(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert score == 2.0 and assign == (0, 1)
    score, assign = greedy_assignment(np.array([[0.5, 0.0], [0.9, 0.0]]))
    assert score == 0.9 and assign == (None, 0)


def test_greedy_lower_bound_six_boxes():
    rng = np.random.default_rng(1)
    for _ in range(40):
        n, m = rng.integers(1, 7, size=2)
        gain = rng.random((n, m)) * (rng.random((n, m)) > 0.4)
        g, _ = greedy_assignment(gain)
        assert g <= oracle.exhaustive_assignment(gain) + 1e-12


def test_score_image_is_max():
    det = DetectionSet("d", (box(100, 100, 200, 200, conf=0.8),))
    refs = [ReferenceLayout((box(0, 0, 40, 300),)), ReferenceLayout((box(100, 100, 200, 200),))]
    s = score_image(refs, det)
    assert s.score == pytest.approx(0.8) and s.reference == 1
    assert score_image(refs[:1], det).score <= s.score
    with pytest.raises(ValueError):
        score_image([], det)


def test_rank_ties_and_order_independence():
    ref = [ReferenceLayout((box(100, 100, 200, 200),))]
    a = DetectionSet("b-img", (box(100, 100, 200, 200, conf=0.5),))
    b = DetectionSet("a-img", (box(100, 100, 200, 200, conf=0.5),))
    c = DetectionSet("c-img", (box(100, 100, 200, 200, conf=0.9),))
    r1 = rank_database(ref, [a, b, c])
    r2 = rank_database(ref, [c, b, a])
    assert [e.image_id for e in r1] == ["c-img", "a-img", "b-img"]
    assert [e.to_dict() for e in r1] == [e.to_dict() for e in r2]
    assert [e.rank for e in r1] == [1, 2, 3]
    assert [e.image_id for e in rank_database(ref, [a])] == ["b-img"]
    with pytest.raises(ValueError):
        rank_database(ref, [])


def test_parallel_ranking_matches_serial():
    ref = [ReferenceLayout((box(100, 100, 200, 200),))]
    db = [DetectionSet(f"i{k}", (box(90 + k, 100, 200 + k, 210, conf=0.5 + k / 20),)) for k in range(6)]
    serial = [e.to_dict() for e in rank_database(ref, db)]
    assert [e.to_dict() for e in rank_database(ref, db, workers=2)] == serial


def test_histogram_baseline(library):
    q = parse_dsl("count 3 chair-0\nchair-0 front desk-0", library)
    img = DetectionSet("i", (box(0, 0, 5, 5), box(10, 0, 15, 5), box(0, 10, 5, 15, "desk"),
                             box(20, 20, 25, 25, "desk", 0.3)))
    assert baseline_histogram(q, img) == -1.0
    assert baseline_histogram({"chair": 2, "desk": 1}, img) == 0.0
    assert baseline_histogram(q, DetectionSet("e", ())) == -4.0
    ranked = rank_baseline(q, [DetectionSet("e", ()), img])
    assert ranked[0].image_id == "i"


def test_metrics_examples():
    assert recall_at_k([1, 12, 3], 10) == pytest.approx(2 / 3)
    assert median_rank([1, 3, 7]) == 3
    assert median_rank([1, 3, 7, 9]) == 5
    assert recall_at_k([[4, 2], [30]], 3) == 0.5
    with pytest.raises(ValueError):
        recall_at_k([[]], 1)


def test_ground_truth_ranks():
    ref = [ReferenceLayout((box(100, 100, 200, 200),))]
    db = [DetectionSet("x", ()), DetectionSet("y", (box(100, 100, 200, 200),))]
    ranking = rank_database(ref, db)
    assert ground_truth_ranks(ranking, ["x"]) == [2]
    with pytest.raises(ValueError):
        ground_truth_ranks(ranking, [])
    with pytest.raises(ValueError):
        ground_truth_ranks(ranking, ["z"])


def test_detection_files(tmp_path):
    d = DetectionSet("img-1", (box(1, 2, 30, 40, conf=0.7),))
    (tmp_path / "img-1.json").write_text(json.dumps(d.to_dict()))
    assert load_detections(tmp_path) == [d]
    with pytest.raises(FileNotFoundError):
        load_detections(tmp_path / "missing")
    with pytest.raises(ValueError):
        DetectionSet("bad", (box(600, 0, 700, 10),))


def test_match_config_validation():
    with pytest.raises(ValueError):
        MatchConfig(mode="fuzzy")
    with pytest.raises(ValueError):
        MatchConfig(scale_min=0)
    with pytest.raises(ValueError):
        MatchConfig(stride=0.5)
    assert list(MatchConfig().scales) == [0.5, 0.625, 0.75, 0.875, 1.0]
