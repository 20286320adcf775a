"""Branch-and-prune search over interval layouts.

The queue is randomised at insertion time: every pushed state is swapped with
a uniformly chosen pending state, so the search order is a seeded shuffle and
early stopping returns a spread of layouts rather than one corner of the room.
"""
from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import relations as rel
from .interval import Tribool
from .relations import Constraint, GEOM_EPS, Prior
from .scene_model import ORIENTATIONS, LayoutState, box_offsets

_OFFSETS_ZERO = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 0.2
    K: int = 5
    max_expansions: int = 10**6
    seed: int = 0
    shrinkage_enabled: bool = True
    early_stopping: bool = True
    # split-selection width of an unresolved orientation; None means 2 * tol
    orientation_width: Optional[float] = math.inf

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be at least 1")

    @property
    def d_width(self) -> float:
        return 2 * self.tol if self.orientation_width is None else self.orientation_width


@dataclass
class SolverStats:
    expansions: int = 0
    prunes: int = 0
    splits: int = 0
    undecided: int = 0
    solutions: int = 0
    wall_time: float = 0.0

    def as_dict(self, with_time: bool = True) -> dict:
        d = {
            "expansions": self.expansions,
            "prunes": self.prunes,
            "splits": self.splits,
            "undecided": self.undecided,
            "solutions": self.solutions,
        }
        if with_time:
            d["wall_time"] = round(self.wall_time, 6)
        return d


# run outcomes
EARLY_STOPPED = "early_stopped"   # K solutions reached
COMPLETE = "complete"             # queue exhausted with solutions
INFEASIBLE = "infeasible"         # queue exhausted without solutions
BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass
class SolveResult:
    solutions: list[LayoutState]
    stats: SolverStats
    status: str

    def __iter__(self):
        # allows ``solutions, stats = solve(...)``
        yield self.solutions
        yield self.stats


@dataclass(frozen=True)
class BoundMatrices:
    """Difference bounds ``L[a, i, j] <= v_i - v_j <= U[a, i, j]`` for axes x, y, z."""

    L: np.ndarray
    U: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[1]

    L_x = property(lambda self: self.L[0])
    L_y = property(lambda self: self.L[1])
    L_z = property(lambda self: self.L[2])
    U_x = property(lambda self: self.U[0])
    U_y = property(lambda self: self.U[1])
    U_z = property(lambda self: self.U[2])

    @classmethod
    def vacuous(cls, n: int, extent: Sequence[float] = (5.0, 5.0, 5.0)) -> "BoundMatrices":
        U = np.empty((3, n, n))
        for a in range(3):
            U[a] = extent[a]
        for a in range(3):
            np.fill_diagonal(U[a], 0.0)
        return cls(-U.transpose(0, 2, 1).copy(), U)

    def is_consistent(self) -> bool:
        return bool(np.all(self.L <= self.U + GEOM_EPS))


def default_init(c: Constraint) -> LayoutState:
    """Pose box whose world cuboids can reach every point of the room."""
    lo, hi = [], []
    for o in c.objects:
        size = o.model.base.size
        xs, ys = [], []
        for k in range(4):
            p, q = box_offsets(size, _OFFSETS_ZERO, size, k)
            xs += [-p[0], c.room[0] - q[0]]
            ys += [-p[1], c.room[1] - q[1]]
        lo += [min(xs), min(ys), 0.0, ORIENTATIONS[0]]
        hi += [max(xs), max(ys), max(0.0, c.room[2] - size[2]), ORIENTATIONS[3]]
    return LayoutState(tuple(lo), tuple(hi))


def _domain_bounds(c: Constraint, init: Optional[LayoutState]) -> BoundMatrices:
    if init is None:
        return BoundMatrices.vacuous(c.n, c.room)
    lo = np.array(init.lo).reshape(-1, 4)[:, :3].T
    hi = np.array(init.hi).reshape(-1, 4)[:, :3].T
    U = hi[:, :, None] - lo[:, None, :]
    for a in range(3):
        np.fill_diagonal(U[a], 0.0)
    return BoundMatrices(-U.transpose(0, 2, 1).copy(), U)


def init_bounds(c: Constraint, n: Optional[int] = None, init: Optional[LayoutState] = None,
                ks: Optional[Sequence[Sequence[int]]] = None) -> BoundMatrices:
    """Bounds from the relation nodes, valid for every orientation in ``ks``.

    Pairs without an extractable relation keep the domain bounds (room extent
    when ``init`` is not given).  The result is not closed.
    """
    n = c.n if n is None else n
    if n != c.n:
        raise ValueError(f"constraint has {c.n} objects, got n={n}")
    b = _domain_bounds(c, init)
    L, U = b.L.copy(), b.U.copy()
    if ks is None:
        ks = [range(4)] * n
    for (i, j, a), (lo, hi) in rel.node_bounds(c, c.root, [tuple(k) for k in ks]).items():
        U[a, i, j] = min(U[a, i, j], hi)
        L[a, i, j] = max(L[a, i, j], lo)
        U[a, j, i] = -L[a, i, j]
        L[a, j, i] = -U[a, i, j]
    return BoundMatrices(L, U)


def close_bounds(b: BoundMatrices) -> Optional[BoundMatrices]:
    """Transitive closure (shortest paths on U); ``None`` when inconsistent."""
    U = np.minimum(b.U, -b.L.transpose(0, 2, 1))
    n = U.shape[1]
    for k in range(n):
        U = np.minimum(U, U[:, :, k:k + 1] + U[:, k:k + 1, :])
    if np.any(np.diagonal(U, axis1=1, axis2=2) < -GEOM_EPS):
        return None
    L = -U.transpose(0, 2, 1)
    if np.any(L > U + GEOM_EPS):
        return None
    for a in range(3):
        np.fill_diagonal(U[a], 0.0)
        np.fill_diagonal(L[a], 0.0)
    return BoundMatrices(L, U)


def _clip(lo: np.ndarray, hi: np.ndarray):
    """Intersect; ``None`` if any interval is empty beyond round-off."""
    bad = lo > hi
    if bad.any():
        if np.any(lo[bad] > hi[bad] + GEOM_EPS):
            return None
        mid = 0.5 * (lo + hi)
        lo = np.where(bad, mid, lo)
        hi = np.where(bad, mid, hi)
    return lo, hi


def shrink(s: LayoutState, b: BoundMatrices) -> Optional[LayoutState]:
    """One pass of ``x_i <- x_i ∩ (x_j + [L_ij, U_ij])`` over all pairs and axes."""
    n = s.n
    lo = np.array(s.lo).reshape(n, 4)
    hi = np.array(s.hi).reshape(n, 4)
    plo, phi = lo[:, :3].T, hi[:, :3].T
    new_lo = np.maximum(plo, np.max(plo[:, None, :] + b.L, axis=2))
    new_hi = np.minimum(phi, np.min(phi[:, None, :] + b.U, axis=2))
    r = _clip(new_lo, new_hi)
    if r is None:
        return None
    lo[:, :3], hi[:, :3] = r[0].T, r[1].T
    return LayoutState(tuple(lo.ravel().tolist()), tuple(hi.ravel().tolist()))


class _Shrinker:
    """Orientation-aware shrinkage with cached closed bound matrices."""

    def __init__(self, c: Constraint, init: LayoutState):
        self.c = c
        self.init = init
        self._cache: dict = {}
        self._hull_cache: dict = {}
        self.ground = [False] * c.n
        self.wall = [False] * c.n
        for node in c.nodes(Prior):
            if node.kind == "ground":
                self.ground[node.index] = True
            elif node.kind == "wall":
                self.wall[node.index] = True
        # per object and orientation: allowed (lo, hi) for x, y, z
        self._unary = [[self._unary_range(i, k) for k in range(4)] for i in range(c.n)]

    def _unary_range(self, i: int, k: int):
        c = self.c
        size = c.objects[i].model.base.size
        p, q = box_offsets(size, _OFFSETS_ZERO, size, k)
        lo = [-p[a] for a in range(3)]
        hi = [c.room[a] - q[a] for a in range(3)]
        if self.ground[i]:
            hi[2] = lo[2] = 0.0
        if self.wall[i]:
            if k == 0:
                lo[0] = hi[0] = -p[0]
            elif k == 1:
                lo[1] = hi[1] = -p[1]
            else:
                return None
        if any(a > b + GEOM_EPS for a, b in zip(lo, hi)):
            return None
        return lo, hi

    def _unary_hull(self, i: int, ks: tuple):
        key = (i, ks)
        h = self._hull_cache.get(key)
        if h is None:
            rng = [self._unary[i][k] for k in ks]
            h = (tuple(min(r[0][a] for r in rng) for a in range(3)),
                 tuple(max(r[1][a] for r in rng) for a in range(3)))
            self._hull_cache[key] = h
        return h

    def bounds(self, ks: tuple) -> Optional[BoundMatrices]:
        if ks not in self._cache:
            b = init_bounds(self.c, init=self.init, ks=ks)
            self._cache[ks] = close_bounds(b)
        return self._cache[ks]

    def __call__(self, s: LayoutState) -> Optional[LayoutState]:
        n = s.n
        lo = list(s.lo)
        hi = list(s.hi)
        ks_all = []
        for i in range(n):
            d = 4 * i + 3
            ks = [k for k in s.orientations(i) if self._unary[i][k] is not None]
            if not ks:
                return None
            lo[d] = max(lo[d], ORIENTATIONS[ks[0]])
            hi[d] = min(hi[d], ORIENTATIONS[ks[-1]])
            ks = tuple(ks)
            ks_all.append(ks)
            ulo, uhi = self._unary_hull(i, ks)
            for a in range(3):
                j = 4 * i + a
                if ulo[a] > lo[j]:
                    lo[j] = ulo[a]
                if uhi[a] < hi[j]:
                    hi[j] = uhi[a]
                if lo[j] > hi[j]:
                    if lo[j] > hi[j] + GEOM_EPS:
                        return None
                    lo[j] = hi[j] = 0.5 * (lo[j] + hi[j])
        b = self.bounds(tuple(ks_all))
        if b is None:
            return None
        out = LayoutState(tuple(lo), tuple(hi))
        for _ in range(3):
            nxt = shrink(out, b)
            if nxt is None or nxt == out:
                return nxt
            out = nxt
        return out


def _widths(s: LayoutState, d_width: float) -> list[float]:
    w = []
    for i in range(s.n):
        for a in range(3):
            w.append(s.hi[4 * i + a] - s.lo[4 * i + a])
        w.append(d_width if len(s.orientations(i)) > 1 else 0.0)
    return w


def split(s: LayoutState, dim: int) -> tuple[LayoutState, LayoutState]:
    """Halve one dimension; orientation dimensions split their discrete set."""
    lo1, hi1 = list(s.lo), list(s.hi)
    lo2, hi2 = list(s.lo), list(s.hi)
    if dim % 4 == 3:
        ks = s.orientations(dim // 4)
        if len(ks) < 2:
            raise ValueError("orientation already resolved")
        h = len(ks) // 2
        lo1[dim], hi1[dim] = ORIENTATIONS[ks[0]], ORIENTATIONS[ks[h - 1]]
        lo2[dim], hi2[dim] = ORIENTATIONS[ks[h]], ORIENTATIONS[ks[-1]]
    else:
        mid = 0.5 * (s.lo[dim] + s.hi[dim])
        hi1[dim] = mid
        lo2[dim] = mid
    return LayoutState(tuple(lo1), tuple(hi1)), LayoutState(tuple(lo2), tuple(hi2))


def solve(c: Constraint, init: Optional[LayoutState] = None,
          cfg: Optional[SolverConfig] = None) -> SolveResult:
    cfg = cfg or SolverConfig()
    init = init or default_init(c)
    if init.n != c.n:
        raise ValueError(f"initial state has {init.n} objects, constraint has {c.n}")
    rng = random.Random(cfg.seed)
    shrinker = _Shrinker(c, init) if cfg.shrinkage_enabled else None
    stats = SolverStats()
    solutions: list[LayoutState] = []
    # entries are (state, root children still undecided on it)
    queue = [(init, None)]
    head = 0
    status = None
    t0 = time.perf_counter()

    def push(state):
        queue.append(state)
        j = rng.randrange(head, len(queue))
        queue[-1], queue[j] = queue[j], queue[-1]

    while head < len(queue):
        if stats.expansions >= cfg.max_expansions:
            status = BUDGET_EXHAUSTED
            break
        s, pending = queue[head]
        queue[head] = None
        head += 1
        if head > 4096 and head * 2 > len(queue):
            del queue[:head]
            head = 0
        stats.expansions += 1
        if shrinker is not None:
            s = shrinker(s)
            if s is None:
                stats.prunes += 1
                continue
        v, pending = rel.eval_pending(c, s, pending)
        if v == Tribool.FALSE:
            stats.prunes += 1
        elif v == Tribool.TRUE:
            solutions.append(s)
            if cfg.early_stopping and len(solutions) >= cfg.K:
                status = EARLY_STOPPED
                break
        else:
            w = _widths(s, cfg.d_width)
            dim = max(range(len(w)), key=lambda k: (w[k], -k))
            if w[dim] > cfg.tol:
                stats.splits += 1
                a, b = split(s, dim)
                push((a, pending))
                push((b, pending))
            else:
                stats.undecided += 1
    if status is None:
        status = COMPLETE if solutions else INFEASIBLE
    stats.solutions = len(solutions)
    stats.wall_time = time.perf_counter() - t0
    return SolveResult(solutions, stats, status)


def sample_layout(s: LayoutState, seed: int = 0) -> LayoutState:
    """Midpoint of every interval; the orientation is drawn from those the box holds."""
    rng = random.Random(seed)
    vals = []
    for i in range(s.n):
        for a in range(3):
            j = 4 * i + a
            vals.append(0.5 * (s.lo[j] + s.hi[j]))
        ks = s.orientations(i)
        if not ks:
            raise ValueError(f"object {i} has no admissible orientation")
        vals.append(ORIENTATIONS[ks[0] if len(ks) == 1 else rng.choice(ks)])
    return LayoutState.point(vals)


# ----------------------------------------------------------------- files

def _rnd(v: float) -> float:
    return round(float(v), 9) + 0.0


def dump_solutions(c: Constraint, result: SolveResult, seed: int = 0) -> dict:
    """JSON-ready record of solution boxes, sampled poses and stats.

    Wall time is left out so that equal seeds give identical files.
    """
    layouts = []
    for idx, s in enumerate(result.solutions):
        pt = sample_layout(s, seed + idx)
        objs = []
        for i, o in enumerate(c.objects):
            box = {k: [_rnd(s.lo[4 * i + a]), _rnd(s.hi[4 * i + a])] for a, k in enumerate("xyzd")}
            pose = {k: _rnd(pt.lo[4 * i + a]) for a, k in enumerate("xyzd")}
            objs.append({"name": o.name, "category": o.ref.category, "box": box, "sample": pose})
        layouts.append({"index": idx, "objects": objs})
    return {
        "status": result.status,
        "objects": [
            {"name": o.name, "category": o.ref.category, "size": list(o.model.base.size),
             "wall": o.wall}
            for o in c.objects
        ],
        "solutions": layouts,
        "stats": result.stats.as_dict(with_time=False),
    }


def write_solutions(path, c: Constraint, result: SolveResult, seed: int = 0) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dump_solutions(c, result, seed), fh, indent=2, sort_keys=True)
        fh.write("\n")


def sampled_layouts(record: dict) -> list[list[dict]]:
    """Concrete poses from a solution record, one list of objects per solution."""
    return [sol["objects"] for sol in record["solutions"]]
