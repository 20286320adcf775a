"""Synthetic retrieval benchmark.

Each target query has a sibling query over the same categories with different
relations.  The database holds one image per target (its ground truth) and
four images per sibling.  Every image comes from its own solver run and
camera, with boxes jittered and spurious detections added.  Category
histograms cannot tell a target from its siblings; layouts can.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import relations, solver
from .projection import Box2D, Intrinsics, ReferenceLayout, generate_references, placed_objects
from .query import Query, parse_dsl
from .retrieval import DetectionSet
from .scene_model import ObjectLibrary, default_library

# (target, sibling) pairs in the triplet DSL
QUERY_PAIRS: tuple[tuple[str, str], ...] = (
    ("lamp-0 on table-0\nchair-0 front table-0",
     "lamp-0 on chair-0\nchair-0 left table-0"),
    ("picture-0 above sofa-0\nside-table-0 right sofa-0",
     "picture-0 above side-table-0\nside-table-0 front sofa-0"),
    ("monitor-0 on desk-0\nchair-0 front desk-0",
     "monitor-0 on chair-0\nchair-0 right desk-0"),
    ("tv-0 on cabinet-0\nsofa-0 front cabinet-0",
     "tv-0 on sofa-0\ncabinet-0 left sofa-0"),
    ("night-stand-0 left bed-0\nlamp-0 on night-stand-0",
     "night-stand-0 front bed-0\nlamp-0 on bed-0"),
    ("mirror-0 above sink-0\ngarbage-bin-0 right sink-0",
     "mirror-0 above garbage-bin-0\ngarbage-bin-0 front sink-0"),
    ("bookshelf-0 left desk-0\nbox-0 on desk-0",
     "box-0 on bookshelf-0\nbookshelf-0 front desk-0"),
    ("pillow-0 on bed-0\npicture-0 above bed-0",
     "pillow-0 front bed-0\npicture-0 above pillow-0"),
    ("dresser-0 right bed-0\nlamp-0 on dresser-0",
     "dresser-0 front bed-0\nlamp-0 on bed-0"),
    ("box-0 on cabinet-0\nchair-0 left cabinet-0",
     "box-0 on chair-0\ncabinet-0 front chair-0"),
)

SIBLING_IMAGES = 4


@dataclass(frozen=True)
class BenchmarkConfig:
    queries: int = 10
    seed: int = 0
    jitter: float = 0.05
    spurious: float = 0.2
    layouts: int = 5
    cameras: int = 1
    solver: solver.SolverConfig = field(default_factory=lambda: solver.SolverConfig(K=5))


@dataclass
class Benchmark:
    queries: dict[str, str]          # query id -> DSL
    references: dict[str, list[ReferenceLayout]]
    database: list[DetectionSet]
    truth: dict[str, list[str]]      # query id -> ground-truth image ids


def image_id(*parts) -> str:
    """Opaque id, so that sorting by id does not favour ground-truth images."""
    return "img-" + hashlib.sha1("/".join(map(str, parts)).encode()).hexdigest()[:12]


def _solve(q: Query, library: ObjectLibrary, cfg: solver.SolverConfig):
    c = relations.compile(q, library)
    res = solver.solve(c, cfg=cfg)
    if not res.solutions:
        raise RuntimeError(f"benchmark query has no solution: {res.status}")
    layouts = [placed_objects(c, solver.sample_layout(s, cfg.seed + i))
               for i, s in enumerate(res.solutions)]
    return layouts


def perturb(boxes: list[Box2D], rng: random.Random, jitter: float, spurious: float,
            categories: list[str], width: int, height: int) -> list[Box2D]:
    """Move every box edge by at most ``jitter`` of the box size and add clutter."""
    out = []
    for b in boxes:
        w, h = b.x_max - b.x_min, b.y_max - b.y_min
        x0 = b.x_min + rng.uniform(-jitter, jitter) * w
        x1 = b.x_max + rng.uniform(-jitter, jitter) * w
        y0 = b.y_min + rng.uniform(-jitter, jitter) * h
        y1 = b.y_max + rng.uniform(-jitter, jitter) * h
        x0, x1 = max(0.0, x0), min(float(width), x1)
        y0, y1 = max(0.0, y0), min(float(height), y1)
        if x0 < x1 and y0 < y1:
            out.append(Box2D(x0, y0, x1, y1, b.category, 1.0))
    for _ in range(max(1, round(spurious * len(boxes)))):
        w, h = rng.uniform(20, 160), rng.uniform(20, 160)
        x0, y0 = rng.uniform(0, width - w), rng.uniform(0, height - h)
        out.append(Box2D(x0, y0, x0 + w, y0 + h, rng.choice(categories), rng.uniform(0.5, 1.0)))
    return out


def _image(layout, seed: int, iid: str, bc: BenchmarkConfig, categories, intr: Intrinsics) -> DetectionSet:
    rng = random.Random(seed)
    ref = generate_references([layout], 1, 1, seed, intr)[0]
    boxes = perturb(list(ref.boxes), rng, bc.jitter, bc.spurious, categories, intr.width, intr.height)
    return DetectionSet(iid, tuple(boxes), intr.width, intr.height)


def build(bc: Optional[BenchmarkConfig] = None, library: Optional[ObjectLibrary] = None) -> Benchmark:
    bc = bc or BenchmarkConfig()
    library = library or default_library()
    intr = Intrinsics()
    categories = sorted(library)
    if not 1 <= bc.queries <= len(QUERY_PAIRS):
        raise ValueError(f"queries must be in 1..{len(QUERY_PAIRS)}")
    queries, references, truth, db = {}, {}, {}, []
    for qi, (target, sibling) in enumerate(QUERY_PAIRS[: bc.queries]):
        qid = f"q{qi:02d}"
        queries[qid] = target + "\n"
        base = bc.seed * 10_007 + qi * 101
        # references come from one run, the ground-truth image from another
        layouts = _solve(parse_dsl(target, library), library,
                         _with_seed(bc.solver, base))
        references[qid] = generate_references(layouts, bc.layouts, bc.cameras, base, intr)
        gt_layout = _solve(parse_dsl(target, library), library, _with_seed(bc.solver, base + 1, K=1))[0]
        gid = image_id(bc.seed, qid, "gt")
        db.append(_image(gt_layout, base + 2, gid, bc, categories, intr))
        truth[qid] = [gid]
        for j in range(SIBLING_IMAGES):
            sl = _solve(parse_dsl(sibling, library), library,
                        _with_seed(bc.solver, base + 10 + j, K=1))[0]
            db.append(_image(sl, base + 20 + j, image_id(bc.seed, qid, "sib", j), bc, categories, intr))
    db.sort(key=lambda d: d.image_id)
    return Benchmark(queries, references, db, truth)


def _with_seed(cfg: solver.SolverConfig, seed: int, **kw) -> solver.SolverConfig:
    return replace(cfg, seed=seed, **kw)


def write(bench: Benchmark, out: Path) -> None:
    """Query files, a detection directory and the ground-truth file."""
    out = Path(out)
    (out / "queries").mkdir(parents=True, exist_ok=True)
    (out / "detections").mkdir(parents=True, exist_ok=True)
    for qid, text in bench.queries.items():
        (out / "queries" / f"{qid}.dsl").write_text(text, encoding="utf-8")
    for d in bench.database:
        (out / "detections" / f"{d.image_id}.json").write_text(
            json.dumps(d.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "ground_truth.json").write_text(
        json.dumps(bench.truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="write the synthetic retrieval benchmark")
    ap.add_argument("out")
    ap.add_argument("--queries", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    write(build(BenchmarkConfig(queries=args.queries, seed=args.seed)), Path(args.out))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
