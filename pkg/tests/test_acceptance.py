"""Acceptance checks, one test (or parametrized family) per criterion.

Run with ``pytest -v``; the terminal summary prints one PASS/FAIL line per
criterion together with the measured values.
"""
import math
import random
import time

import numpy as np
import pytest

import oracle
from conftest import BEDROOM_TEXT, BEDROOM_TRIPLETS
from layoutsearch import benchmark, cli
from layoutsearch import relations as R
from layoutsearch import solver as S
from layoutsearch.interval import Interval, Tribool, add, lt, scale_shift, sub
from layoutsearch.projection import Box2D
from layoutsearch.query import parse_dsl, parse_english
from layoutsearch.retrieval import (
    ground_truth_ranks, greedy_assignment, iou, load_detections, median_rank, rank_baseline,
    rank_database, recall_at_k,
)
from layoutsearch.scene_model import ORIENTATIONS, Pose, corners, sub_corners, support_height

T = Tribool.TRUE
GRID = 0.05


# ---------------------------------------------------------------- 1

@pytest.mark.criterion(1, "bedroom paragraph parses to its five triplets in under 1 s")
def test_parsing_fidelity(library, note):
    t0 = time.perf_counter()
    q = parse_english(BEDROOM_TEXT, library)
    elapsed = time.perf_counter() - t0
    note(f"{elapsed * 1000:.1f} ms")
    assert [str(t) for t in q.triplets] == BEDROOM_TRIPLETS
    assert elapsed < 1.0


# ---------------------------------------------------------------- 2

def _interval(rng):
    a, b = rng.uniform(-50, 50), rng.uniform(-50, 50)
    if rng.random() < 0.1:
        b = a
    return Interval(min(a, b), max(a, b))


def _inside(rng, a):
    return rng.uniform(a.lo, a.hi)


def _shrunk(rng, a):
    u, v = sorted((rng.uniform(a.lo, a.hi), rng.uniform(a.lo, a.hi)))
    return Interval(u, v)


@pytest.mark.criterion(2, "interval kernel containment and monotonicity, 10^4 cases")
def test_interval_kernel(note):
    rng = random.Random(2024)
    violations = 0
    for _ in range(10_000):
        a, b = _interval(rng), _interval(rng)
        k, c = rng.uniform(-5, 5), rng.uniform(-5, 5)
        x, y = _inside(rng, a), _inside(rng, b)
        sa, sb = _shrunk(rng, a), _shrunk(rng, b)
        tol = 1e-9
        # containment of every pointwise result
        violations += not (add(a, b).lo - tol <= x + y <= add(a, b).hi + tol)
        violations += not (sub(a, b).lo - tol <= x - y <= sub(a, b).hi + tol)
        violations += not (scale_shift(a, k, c).lo - tol <= k * x + c <= scale_shift(a, k, c).hi + tol)
        v = lt(a, b)
        if v != Tribool.MAYBE:
            violations += (x < y) != (v == T)
        # shrinking operands can only shrink results and refine lt
        violations += not add(a, b).contains(add(sa, sb))
        violations += not sub(a, b).contains(sub(sa, sb))
        violations += not scale_shift(a, k, c).contains(scale_shift(sa, k, c))
        if v != Tribool.MAYBE:
            violations += lt(sa, sb) != v
    note(f"{violations} violations")
    assert violations == 0


# ---------------------------------------------------------------- 3, 4

@pytest.fixture(scope="module")
def bedroom(library):
    return R.compile(parse_english(BEDROOM_TEXT, library), library)


def _sample_point(rng, s):
    vals = []
    for j in range(len(s.lo)):
        if j % 4 == 3:
            vals.append(ORIENTATIONS[rng.choice(s.orientations(j // 4))])
        else:
            vals.append(rng.uniform(s.lo[j], s.hi[j]))
    return vals


@pytest.mark.criterion(3, "bedroom solutions are sound, at least 5 within 60 s")
def test_solver_soundness(bedroom, note):
    t0 = time.perf_counter()
    r = S.solve(bedroom, cfg=S.SolverConfig(K=5, tol=0.2))
    elapsed = time.perf_counter() - t0
    note(f"{len(r.solutions)} solutions, {r.stats.expansions} expansions, {elapsed:.1f} s")
    assert len(r.solutions) >= 5
    assert elapsed < 60
    rng = random.Random(3)
    for s in r.solutions:
        assert R.eval(bedroom, s) == T
        for _ in range(100):
            assert R.holds(bedroom, _sample_point(rng, s))


@pytest.mark.criterion(4, "shrinkage cuts expansions 10x or the unshrunk run exhausts 10^5")
def test_shrinkage_ablation(bedroom, note):
    on = S.solve(bedroom, cfg=S.SolverConfig(K=5, max_expansions=100_000))
    off = S.solve(bedroom, cfg=S.SolverConfig(K=5, max_expansions=100_000, shrinkage_enabled=False))
    note(f"with {on.stats.expansions} ({on.status}), without {off.stats.expansions} "
         f"({off.status}, {len(off.solutions)} solutions)")
    assert on.status == S.EARLY_STOPPED
    exhausted = off.status == S.BUDGET_EXHAUSTED and len(off.solutions) < 5
    assert off.stats.expansions >= 10 * on.stats.expansions or exhausted


# ---------------------------------------------------------------- 5

ROOM = (1.5, 1.5, 1.5)

# scene text, relation, fixed heights (ground prior, resting height on the table)
SCENES = {
    "bin-left-cabinet": ("garbage-bin-0 left cabinet-0", "left", (0.0, 0.0)),
    "box-on-table": ("box-0 on side-table-0", "on", (0.55, 0.0)),
}


def _axis(lo, hi):
    n = int(math.floor((hi - lo) / GRID + 1e-9))
    return np.round(lo + GRID * np.arange(n + 1), 9)


def _feasible(c, rel, zs, axes, k0, k1):
    """Oracle feasibility on the 4D (x0, y0, x1, y1) grid for fixed orientations."""
    m0, m1 = c.objects[0].model.base, c.objects[1].model.base
    x0 = axes[0][:, None, None, None]
    y0 = axes[1][None, :, None, None]
    x1 = axes[2][None, None, :, None]
    y1 = axes[3][None, None, None, :]
    t = oracle.Obj(x0, y0, zs[0], k0, m0.size, m0.z_s / m0.l_z)
    r = oracle.Obj(x1, y1, zs[1], k1, m1.size, m1.z_s / m1.l_z)
    ok = (oracle.in_room(t, ROOM) & oracle.in_room(r, ROOM) & oracle.disjoint(t, r)
          & oracle.RELATIONS[rel](t, r) & oracle.near(t, r, d=2.0))
    return np.broadcast_to(ok, tuple(len(a) for a in axes))


def _gap(values, lo, hi):
    return np.maximum(np.maximum(lo - values, 0.0), values - hi)


@pytest.mark.criterion(5, "grid oracle completeness on two-object scenes")
@pytest.mark.parametrize("scene", sorted(SCENES))
def test_oracle_completeness(library, note, scene):
    text, rel, zs = SCENES[scene]
    t0 = time.perf_counter()
    c = R.compile(parse_dsl(text, library), library, room=ROOM)
    cfg = S.SolverConfig(early_stopping=False)
    res = S.solve(c, cfg=cfg)
    assert res.status == S.COMPLETE
    init = S.default_init(c)
    free = (0, 1, 4, 5)
    axes = [_axis(init.lo[d], init.hi[d]) for d in free]
    # the pinned heights are inside the search domain
    for i in (0, 1):
        assert init.lo[4 * i + 2] <= zs[i] <= init.hi[4 * i + 2]
    radius = cfg.tol * math.sqrt(len(free))
    feasible, worst, empty = 0, 0.0, 0
    masks = {}
    for k0 in range(4):
        for k1 in range(4):
            F = _feasible(c, rel, zs, axes, k0, k1)
            masks[k0, k1] = F
            if not F.any():
                continue
            feasible += int(F.sum())
            best = np.full(F.shape, np.inf)
            for s in res.solutions:
                if k0 not in s.orientations(0) or k1 not in s.orientations(1):
                    continue
                g = [_gap(a, s.lo[d], s.hi[d]) ** 2 for a, d in zip(axes, free)]
                zgap = sum(_gap(zs[i], s.lo[4 * i + 2], s.hi[4 * i + 2]) ** 2 for i in (0, 1))
                d2 = (g[0][:, None, None, None] + g[1][None, :, None, None]
                      + g[2][None, None, :, None] + g[3][None, None, None, :] + zgap)
                np.minimum(best, d2, out=best)
            dist = np.sqrt(best[F])
            worst = max(worst, float(dist.max()))
    for s in res.solutions:
        if min(s.hi[d] - s.lo[d] for d in free) < GRID:
            continue
        sl = [np.flatnonzero((a >= s.lo[d] - 1e-9) & (a <= s.hi[d] + 1e-9)) for a, d in zip(axes, free)]
        hit = any(masks[k0, k1][np.ix_(*sl)].any()
                  for k0 in s.orientations(0) for k1 in s.orientations(1))
        empty += not hit
    elapsed = time.perf_counter() - t0
    note(f"{scene}: {feasible} grid points, {len(res.solutions)} boxes, worst distance "
         f"{worst:.3f} <= {radius:.3f}, {empty} empty wide boxes, {elapsed:.1f} s")
    assert feasible > 0
    assert worst <= radius + 1e-9
    assert empty == 0
    assert elapsed < 300


# ---------------------------------------------------------------- 6

def _posed(rng, library, category, on_top_of=None):
    m = library[category]
    k = rng.randrange(4)
    if on_top_of is None:
        x, y = rng.uniform(0, 3), rng.uniform(0, 3)
        z = rng.choice([0.0, rng.uniform(0, 1.5)])
    else:
        rpose, rmodel = on_top_of
        # rest the base on the supporting surface, roughly centred
        x = rpose.x.lo + rmodel.base.l_x / 2 - m.base.l_x / 2 + rng.uniform(-0.05, 0.05)
        y = rpose.y.lo + rmodel.base.l_y / 2 - m.base.l_y / 2 + rng.uniform(-0.05, 0.05)
        z = support_height(rpose, rmodel).lo
    pose = Pose.at(x, y, z, ORIENTATIONS[k])
    geo = (corners(pose, m.base), support_height(pose, m), pose.d)
    parts = [sub_corners(pose, m, i) for i in range(len(m.parts))] or [corners(pose, m.base)]
    return pose, m, geo, parts


def _turned(pose, m):
    """The same object rotated by a half turn about its centre."""
    k = (round(pose.d.lo / (math.pi / 2)) + 2) % 4
    p = Pose.at(pose.x.lo, pose.y.lo, pose.z.lo, ORIENTATIONS[k])
    return corners(p, m.base), support_height(p, m), p.d


@pytest.mark.criterion(6, "relation properties on 10^3 random degenerate pose pairs")
def test_relation_properties(library, note):
    rng = random.Random(6)
    cats = sorted(library)
    violations = 0
    seen = dict.fromkeys(("front", "on", "left", "exclusive"), 0)
    for n in range(1000):
        rpose, rmodel, gr, pr = _posed(rng, library, rng.choice(cats))
        stacked = n % 4 == 0
        _, _, gt, pt = _posed(rng, library, rng.choice(cats), (rpose, rmodel) if stacked else None)
        front, behind = R.eval_atomic("front", gt, gr), R.eval_atomic("behind", gt, gr)
        violations += front == T and behind == T
        flipped = _turned(rpose, rmodel)
        for a, b in (("left", "right"), ("right", "left")):
            violations += (R.eval_atomic(a, gt, gr) == T) != (R.eval_atomic(b, gt, flipped) == T)
        on = R.eval_atomic("on", gt, gr)
        violations += on == T and R.eval_atomic("under", gt, gr) == T
        ex = R.exclusive([pt, pr])
        violations += ex != R.exclusive([pr, pt])
        seen["front"] += front == T
        seen["on"] += on == T
        seen["left"] += R.eval_atomic("left", gt, gr) == T
        seen["exclusive"] += ex == T
    note(f"{violations} violations; true counts {seen}")
    assert violations == 0
    assert all(v > 0 for v in seen.values())


# ---------------------------------------------------------------- 7

def _random_boxes(rng, n, cats):
    out = []
    for _ in range(n):
        w, h = rng.uniform(20, 250), rng.uniform(20, 250)
        x, y = rng.uniform(0, 640 - w), rng.uniform(0, 480 - h)
        out.append(Box2D(x, y, x + w, y + h, rng.choice(cats), rng.uniform(0.05, 1.0)))
    return out


def _competing(gain):
    return bool(((gain > 0).sum(axis=0) > 1).any())


@pytest.mark.criterion(7, "greedy matching against exhaustive optimum, IoU against area oracle")
def test_matching_oracle(note):
    rng = random.Random(7)
    worst_iou, below, non_competing = 0.0, 0, 0
    for _ in range(200):
        cats = ["chair", "table"][: rng.randint(1, 2)]
        # clustered boxes so that detections are often contested
        refs = _random_boxes(rng, rng.randint(1, 4), cats)
        dets = _random_boxes(rng, rng.randint(1, 4), cats)
        gain = np.zeros((len(refs), len(dets)))
        for i, a in enumerate(refs):
            for j, b in enumerate(dets):
                o = oracle.box_iou((a.x_min, a.y_min, a.x_max, a.y_max), (b.x_min, b.y_min, b.x_max, b.y_max))
                worst_iou = max(worst_iou, abs(iou(a, b) - o))
                if a.category == b.category:
                    gain[i, j] = b.confidence * o
        greedy, _ = greedy_assignment(gain)
        best = oracle.permutation_assignment(gain)
        assert greedy <= best + 1e-12
        below += greedy < best - 1e-12
        if not _competing(gain):
            non_competing += 1
            assert greedy == pytest.approx(best, abs=1e-12)
    note(f"max |iou - oracle| {worst_iou:.1e}; {non_competing} non-competing; greedy below optimum in {below}")
    assert worst_iou <= 1e-9
    assert non_competing > 0


# ---------------------------------------------------------------- 8

METRIC_FIXTURES = [
    ("recall", [1, 12, 3], 10, 2 / 3),
    ("recall", [1, 2, 3], 1, 1 / 3),
    ("recall", [5, 5, 5, 5], 4, 0.0),
    ("recall", [[4, 2], [30]], 3, 0.5),
    ("recall", [[7, 1], [2, 9], [11]], 2, 2 / 3),
    ("recall", [500, 501], 500, 0.5),
    ("median", [1, 3, 7], None, 3.0),
    ("median", [1, 3, 7, 9], None, 5.0),
    ("median", [[4, 2], [30], [6]], None, 5.0),
    ("median", [42], None, 42.0),
]


@pytest.mark.criterion(8, "recall_at_k and median_rank on 10 hand-computed fixtures")
@pytest.mark.parametrize("kind,ranks,k,expected", METRIC_FIXTURES)
def test_metric_fixtures(kind, ranks, k, expected):
    got = recall_at_k(ranks, k) if kind == "recall" else median_rank(ranks)
    assert got == expected


# ---------------------------------------------------------------- 9, 10

@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    t0 = time.perf_counter()
    bench = benchmark.build(benchmark.BenchmarkConfig())
    benchmark.write(bench, out)
    return out, bench, time.perf_counter() - t0


@pytest.mark.criterion(9, "synthetic retrieval: soft R@1 >= 0.8 and above the histogram baseline")
def test_end_to_end_retrieval(bench_dir, library, note):
    out, bench, build_time = bench_dir
    t0 = time.perf_counter()
    db = load_detections(out / "detections")
    soft, hist = [], []
    for qid, text in sorted(bench.queries.items()):
        soft.append(ground_truth_ranks(rank_database(bench.references[qid], db), bench.truth[qid]))
        hist.append(ground_truth_ranks(rank_baseline(parse_dsl(text, library), db), bench.truth[qid]))
    elapsed = build_time + time.perf_counter() - t0
    r_soft, r_hist = recall_at_k(soft, 1), recall_at_k(hist, 1)
    note(f"{len(soft)} queries, {len(db)} images: soft R@1 {r_soft:.2f}, histogram R@1 {r_hist:.2f}, "
         f"{elapsed:.0f} s")
    assert len(soft) == 10 and len(db) == 50
    assert r_soft >= 0.8
    assert r_soft > r_hist
    assert elapsed < 600


@pytest.mark.criterion(10, "two pipeline runs with one seed give byte-identical rankings")
def test_pipeline_determinism(bench_dir, tmp_path, note):
    out = bench_dir[0]
    queries = [str(p) for p in sorted((out / "queries").glob("*.dsl"))[:2]]
    files = []
    for run in ("a", "b"):
        work = tmp_path / run
        args = ["pipeline", *queries, "--detections", str(out / "detections"),
                "--ground-truth", str(out / "ground_truth.json"), "--work-dir", str(work),
                "--seed", "11", "-K", "3", "-m", "3"]
        assert cli.main(args) == cli.EXIT_OK
        files.append({p.name: p.read_bytes() for p in sorted(work.glob("*.ranking.json"))})
    note(f"{len(files[0])} ranking files compared")
    assert len(files[0]) == 2
    assert files[0] == files[1]
