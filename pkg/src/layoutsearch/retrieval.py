"""Layout matching against detections, image ranking and evaluation metrics."""
from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .projection import Box2D, ReferenceLayout
from .query import Query, expand_counts


@dataclass(frozen=True)
class DetectionSet:
    image_id: str
    boxes: tuple[Box2D, ...]
    width: int = 640
    height: int = 480

    def __post_init__(self) -> None:
        for b in self.boxes:
            if b.x_min < -1e-6 or b.y_min < -1e-6 or b.x_max > self.width + 1e-6 \
                    or b.y_max > self.height + 1e-6:
                raise ValueError(f"{self.image_id}: box outside the image: {b}")

    def to_dict(self) -> dict:
        return {"image_id": self.image_id, "width": self.width, "height": self.height,
                "boxes": [b.to_dict() for b in self.boxes]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DetectionSet":
        return cls(str(d["image_id"]), tuple(Box2D.from_dict(b) for b in d.get("boxes", [])),
                   int(d.get("width", 640)), int(d.get("height", 480)))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DetectionSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def load_detections(directory: Union[str, Path]) -> list[DetectionSet]:
    """All ``*.json`` detection files of a directory, sorted by image id."""
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no detection files in {directory}")
    return sorted((DetectionSet.load(p) for p in paths), key=lambda d: d.image_id)


@dataclass(frozen=True)
class MatchConfig:
    mode: str = "soft"
    detection_threshold: float = 0.5
    scale_min: float = 0.5
    scale_max: float = 1.0
    scale_count: int = 5
    stride: float = 10.0
    # uniform detection weight in hard mode
    hard_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in ("hard", "soft"):
            raise ValueError(f"mode must be hard or soft, not {self.mode!r}")
        if not 0 < self.scale_min <= self.scale_max <= 1:
            raise ValueError("scale range must lie within (0, 1]")
        if self.scale_count < 1:
            raise ValueError("scale_count must be at least 1")
        if self.stride < 1:
            raise ValueError("stride must be at least 1 pixel")

    @property
    def scales(self) -> np.ndarray:
        return np.linspace(self.scale_min, self.scale_max, self.scale_count)


@dataclass(frozen=True)
class MatchResult:
    score: float
    scale: float
    translation: tuple[float, float]
    assignment: tuple[Optional[int], ...]


def iou(a: Box2D, b: Box2D) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    return inter / (a.area + b.area - inter)


def _weights(det: DetectionSet, cfg: MatchConfig):
    """Usable detections (original indices) and their weights p."""
    if cfg.mode == "hard":
        idx = [j for j, b in enumerate(det.boxes) if b.confidence >= cfg.detection_threshold]
        return idx, np.full(len(idx), cfg.hard_weight)
    idx = list(range(len(det.boxes)))
    return idx, np.array([det.boxes[j].confidence for j in idx], dtype=float)


def _arr(boxes: Sequence[Box2D]) -> np.ndarray:
    return np.array([[b.x_min, b.y_min, b.x_max, b.y_max] for b in boxes], dtype=float).reshape(-1, 4)


def _translations(lo: float, hi: float, size: float, stride: float) -> np.ndarray:
    """Multiples of ``stride`` keeping [lo + t, hi + t] overlapping [0, size]."""
    k0 = int(np.floor(-hi / stride)) + 1
    k1 = int(np.ceil((size - lo) / stride)) - 1
    return np.arange(k0, k1 + 1, dtype=float) * stride


def _iou_grid(R: np.ndarray, D: np.ndarray, tx: np.ndarray, ty: np.ndarray) -> np.ndarray:
    """IoU of translated reference boxes with detections: shape (T, n, m)."""
    T = len(tx)
    x0 = R[None, :, 0] + tx[:, None]
    x1 = R[None, :, 2] + tx[:, None]
    y0 = R[None, :, 1] + ty[:, None]
    y1 = R[None, :, 3] + ty[:, None]
    w = np.minimum(x1[:, :, None], D[None, None, :, 2]) - np.maximum(x0[:, :, None], D[None, None, :, 0])
    h = np.minimum(y1[:, :, None], D[None, None, :, 3]) - np.maximum(y0[:, :, None], D[None, None, :, 1])
    inter = np.clip(w, 0, None) * np.clip(h, 0, None)
    ra = ((R[:, 2] - R[:, 0]) * (R[:, 3] - R[:, 1]))[None, :, None]
    da = ((D[:, 2] - D[:, 0]) * (D[:, 3] - D[:, 1]))[None, None, :]
    out = inter / (ra + da - inter)
    return out.reshape(T, R.shape[0], D.shape[0])


def _greedy(gain: np.ndarray):
    """Greedy assignment for a stack of gain matrices (T, n, m).

    Returns total scores (T,) and, per stack entry, the reference -> detection map
    as an (T, n) array with -1 for unassigned.
    """
    G = gain.copy()
    T, n, m = G.shape
    total = np.zeros(T)
    assign = np.full((T, n), -1, dtype=int)
    rows = np.arange(T)
    for _ in range(min(n, m)):
        flat = G.reshape(T, -1)
        k = np.argmax(flat, axis=1)
        best = flat[rows, k]
        live = best > 0
        if not live.any():
            break
        i, j = np.divmod(k, m)
        total[live] += best[live]
        assign[rows[live], i[live]] = j[live]
        G[rows[live], i[live], :] = 0.0
        G[rows[live], :, j[live]] = 0.0
    return total, assign


def greedy_assignment(gain: np.ndarray):
    """Greedy assignment on one (n, m) gain matrix; returns (score, assignment)."""
    total, assign = _greedy(np.asarray(gain, dtype=float)[None])
    return float(total[0]), tuple(int(a) if a >= 0 else None for a in assign[0])


def match_layout(ref: ReferenceLayout, det: DetectionSet, cfg: Optional[MatchConfig] = None) -> MatchResult:
    """Best greedy weighted-IoU matching over the scale and translation grid."""
    cfg = cfg or MatchConfig()
    n = len(ref.boxes)
    idx, p = _weights(det, cfg)
    empty = MatchResult(0.0, 1.0, (0.0, 0.0), (None,) * n)
    if not idx or not n:
        return empty
    dboxes = [det.boxes[j] for j in idx]
    same = np.array([[rb.category == db.category for db in dboxes] for rb in ref.boxes])
    if not same.any():
        return empty
    weight = same * p[None, :]
    D = _arr(dboxes)
    g = min(det.width / ref.width, det.height / ref.height)
    R0 = _arr(ref.boxes) * g
    best = (-1.0, None)
    for s in cfg.scales:
        R = R0 * s
        txs = _translations(R[:, 0].min(), R[:, 2].max(), det.width, cfg.stride)
        tys = _translations(R[:, 1].min(), R[:, 3].max(), det.height, cfg.stride)
        TX, TY = np.meshgrid(txs, tys, indexing="ij")
        tx, ty = TX.ravel(), TY.ravel()
        gain = _iou_grid(R, D, tx, ty) * weight[None]
        total, _ = _greedy(gain)
        k = int(np.argmax(total))
        if total[k] > best[0] + 1e-12:
            best = (float(total[k]), (float(s), float(tx[k]), float(ty[k])))
    s, tx, ty = best[1]
    R = R0 * s
    gain = _iou_grid(R, D, np.array([tx]), np.array([ty]))[0] * weight
    score, assign = greedy_assignment(gain)
    assignment = tuple(None if a is None else idx[a] for a in assign)
    return MatchResult(score, s, (tx, ty), assignment)


@dataclass(frozen=True)
class ImageScore:
    image_id: str
    score: float
    reference: Optional[int] = None
    match: Optional[MatchResult] = None


def score_image(refs: Sequence[ReferenceLayout], det: DetectionSet,
                cfg: Optional[MatchConfig] = None) -> ImageScore:
    """Highest match score over all reference layouts."""
    if not refs:
        raise ValueError("at least one reference layout is required")
    best = None
    for r, ref in enumerate(refs):
        m = match_layout(ref, det, cfg)
        if best is None or m.score > best.score:
            best = ImageScore(det.image_id, m.score, r, m)
    return best


@dataclass(frozen=True)
class RankEntry:
    rank: int
    image_id: str
    score: float
    reference: Optional[int] = None
    match: Optional[MatchResult] = None

    def to_dict(self) -> dict:
        d = {"rank": self.rank, "image_id": self.image_id, "score": round(self.score, 9)}
        if self.match is not None:
            d["reference"] = self.reference
            d["best_scale"] = round(self.match.scale, 9)
            d["best_translation"] = [round(t, 9) for t in self.match.translation]
            d["assignment"] = list(self.match.assignment)
        return d


def _order(scores: Sequence[ImageScore]) -> list[RankEntry]:
    ranked = sorted(scores, key=lambda s: (-s.score, s.image_id))
    return [RankEntry(i + 1, s.image_id, s.score, s.reference, s.match) for i, s in enumerate(ranked)]


def _score_one(args):
    refs, det, cfg = args
    return score_image(refs, det, cfg)


def rank_database(refs: Sequence[ReferenceLayout], db: Sequence[DetectionSet],
                  cfg: Optional[MatchConfig] = None, workers: int = 1) -> list[RankEntry]:
    """Images by descending score; equal scores in image id order."""
    if not db:
        raise ValueError("the detection database is empty")
    cfg = cfg or MatchConfig()
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            scores = list(ex.map(_score_one, [(refs, d, cfg) for d in db], chunksize=4))
    else:
        scores = [score_image(refs, d, cfg) for d in db]
    return _order(scores)


def query_histogram(query: Query) -> Counter:
    q = expand_counts(query)
    return Counter(r.category for r in q.objects())


def baseline_histogram(query: Union[Query, Mapping[str, int]], det: DetectionSet,
                       cfg: Optional[MatchConfig] = None) -> float:
    """Negative l1 distance between query and detected category counts."""
    cfg = cfg or MatchConfig()
    want = query_histogram(query) if isinstance(query, Query) else Counter(query)
    have = Counter(b.category for b in det.boxes if b.confidence >= cfg.detection_threshold)
    return -float(sum(abs(want[c] - have[c]) for c in set(want) | set(have)))


def rank_baseline(query: Union[Query, Mapping[str, int]], db: Sequence[DetectionSet],
                  cfg: Optional[MatchConfig] = None) -> list[RankEntry]:
    if not db:
        raise ValueError("the detection database is empty")
    return _order([ImageScore(d.image_id, baseline_histogram(query, d, cfg)) for d in db])


def ground_truth_ranks(ranking: Sequence[RankEntry], truth: Sequence[str]) -> list[int]:
    """Ranks of the ground-truth images within one ranking."""
    if not truth:
        raise ValueError("query has no ground-truth image")
    pos = {e.image_id: e.rank for e in ranking}
    missing = [t for t in truth if t not in pos]
    if missing:
        raise ValueError(f"ground-truth images not in ranking: {missing}")
    return [pos[t] for t in truth]


RankList = Sequence[Union[int, Sequence[int]]]


def _per_query(ranks: RankList) -> list[list[int]]:
    out = []
    for r in ranks:
        rs = [int(r)] if isinstance(r, (int, np.integer)) else [int(x) for x in r]
        if not rs:
            raise ValueError("query has no ground-truth rank")
        if min(rs) < 1:
            raise ValueError("ranks start at 1")
        out.append(rs)
    if not out:
        raise ValueError("no queries")
    return out


def recall_at_k(ranks: RankList, k: int) -> float:
    """Fraction of queries with a ground-truth image in the top ``k``.

    ``ranks`` holds, per query, one rank or the list of its ground-truth ranks.
    """
    q = _per_query(ranks)
    return sum(1 for rs in q if min(rs) <= k) / len(q)


def median_rank(ranks: RankList) -> float:
    """Median over every ground-truth rank of every query."""
    q = _per_query(ranks)
    return float(np.median([r for rs in q for r in rs]))
