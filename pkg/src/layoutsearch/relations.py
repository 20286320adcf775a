"""Spatial relations, priors and their evaluation over interval layouts.

A query is compiled into a tree of constraint nodes.  Evaluating the tree on a
:class:`~layoutsearch.scene_model.LayoutState` yields a :class:`Tribool` that is
``TRUE`` only if every point of the box satisfies every node.

Orientations that a box leaves open are enumerated: a relation is decided only
when it is decided the same way for every orientation the box allows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional, Sequence, Union

from .interval import Tribool, agree, all_of, any_of
from .query import (
    ATOMIC_RELATIONS,
    COMPOSITE_RELATIONS,
    GroupRef,
    ObjectRef,
    Query,
    expand_counts,
)
from .scene_model import (
    LayoutState,
    ObjectLibrary,
    ObjectModel,
    box_offsets,
    orientation_indices,
    rotation,
)

T, M, F = Tribool.TRUE, Tribool.MAYBE, Tribool.FALSE

# Closed comparisons accept this much float round-off.
GEOM_EPS = 1e-9

WALL_RELATIONS = ("next-to", "side-by-side", "in-a-row")


@dataclass(frozen=True)
class RelationThresholds:
    d_near: float = 0.5
    d_min_above: float = 0.25
    d_max_above: float = 0.5
    # coherence: objects of one triplet stay within this distance
    d_coherence: float = 2.0
    # allowed gap for "on", wall contact and floor contact
    contact_tol: float = 0.0

    def __post_init__(self) -> None:
        if min(self.d_near, self.d_min_above, self.d_max_above, self.d_coherence) <= 0:
            raise ValueError("relation thresholds must be positive")
        if self.d_min_above > self.d_max_above:
            raise ValueError("d_min_above must not exceed d_max_above")
        if self.contact_tol < 0:
            raise ValueError("contact_tol must be non-negative")


@dataclass(frozen=True)
class AxisFrame:
    """Direction ``u`` and enlargement vector ``e`` for an orientation."""

    theta: float

    @classmethod
    def of(cls, k: int) -> "AxisFrame":
        return cls(k % 4 * math.pi / 2)

    def _cs(self) -> tuple[float, float]:
        k = self.theta / (math.pi / 2)
        if abs(k - round(k)) < 1e-9:
            return rotation(int(round(k)))
        return math.cos(self.theta), math.sin(self.theta)

    @property
    def u(self) -> tuple[float, float, float]:
        c, s = self._cs()
        return (c, s, 0.0)

    @property
    def e(self) -> tuple[float, float, float]:
        c, s = self._cs()
        return (c - s, s + c, 1.0)


# ------------------------------------------------------------------ nodes

@dataclass(frozen=True)
class Part:
    """An object, or a named part of it."""

    index: int
    part: Optional[str] = None


@dataclass(frozen=True)
class Group:
    """Virtual object bounded by several objects; oriented like its first member."""

    members: tuple[int, ...]


Operand = Union[Part, Group]


@dataclass(frozen=True)
class Atomic:
    relation: str
    target: Operand
    reference: Operand
    # overrides d_near; used by the coherence prior
    distance: Optional[float] = None


@dataclass(frozen=True)
class Composite:
    relation: str
    operands: tuple[Operand, ...]


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Exclusive:
    indices: tuple[int, ...]


@dataclass(frozen=True)
class Prior:
    kind: str  # room | ground | wall
    index: int


@dataclass(frozen=True)
class SameOrientation:
    a: int
    b: int


Node = Union[Atomic, Composite, And, Or, Exclusive, Prior, SameOrientation]


@dataclass(frozen=True)
class SceneObject:
    name: str
    ref: ObjectRef
    model: ObjectModel
    wall: bool = False
    ground: bool = False


@dataclass(frozen=True)
class Constraint:
    objects: tuple[SceneObject, ...]
    root: And
    thresholds: RelationThresholds = field(default_factory=RelationThresholds)
    room: tuple[float, float, float] = (5.0, 5.0, 5.0)

    @property
    def n(self) -> int:
        return len(self.objects)

    def names(self) -> list[str]:
        return [o.name for o in self.objects]

    def nodes(self, kind=None) -> list:
        out = []

        def walk(node):
            if isinstance(node, (And, Or)):
                for c in node.children:
                    walk(c)
            elif kind is None or isinstance(node, kind):
                out.append(node)

        walk(self.root)
        return out


# --------------------------------------------------------------- compile

def compile(
    query: Query,
    library: ObjectLibrary,
    th: Optional[RelationThresholds] = None,
    room: Sequence[float] = (5.0, 5.0, 5.0),
) -> Constraint:
    """Turn a query into relation nodes plus priors."""
    th = th or RelationThresholds()
    q = expand_counts(query)
    refs = q.objects()
    index = {r: i for i, r in enumerate(refs)}

    def operand(ref) -> Operand:
        if isinstance(ref, GroupRef):
            return Group(tuple(index[m.base] for m in ref.members))
        return Part(index[ref.base], ref.sub_object)

    def members(ref) -> list[int]:
        if isinstance(ref, GroupRef):
            return [index[m.base] for m in ref.members]
        return [index[ref.base]]

    supported = set()
    for t in q.triplets:
        if t.relation in ("on", "above") and not t.is_group_relation:
            supported.update(members(t.target))

    wall, ground, models = [], [], []
    for i, ref in enumerate(refs):
        if ref.category not in library:
            raise ValueError(f"category {ref.category!r} is not in the object library")
        attrs = q.attributes.get(ref, ())
        model = library.model(ref.category, attrs)
        models.append(model)
        wall.append(
            bool({"on_wall", "against_wall"} & model.flags)
            or "against-wall" in attrs or "on-wall" in attrs
        )
        ground.append("on_ground" in model.flags and i not in supported)

    # next-to / side-by-side / in-a-row spread wall contact and orientation
    same: list[tuple[int, int]] = []
    changed = True
    while changed:
        changed = False
        for t in q.triplets:
            if t.relation not in WALL_RELATIONS:
                continue
            ids = list(dict.fromkeys(members(t.target) + members(t.reference)))
            if any(wall[i] for i in ids):
                for i in ids:
                    if not wall[i]:
                        wall[i] = True
                        changed = True
                for a, b in zip(ids, ids[1:]):
                    if (a, b) not in same:
                        same.append((a, b))

    objects = tuple(
        SceneObject(str(r), r, models[i], wall[i], ground[i]) for i, r in enumerate(refs)
    )

    priors: list[Node] = [Prior("room", i) for i in range(len(refs))]
    priors += [Prior("ground", i) for i in range(len(refs)) if ground[i]]
    priors += [Prior("wall", i) for i in range(len(refs)) if wall[i]]
    priors += [SameOrientation(a, b) for a, b in same]

    relations: list[Node] = []
    coherence: list[Node] = []
    for t in q.triplets:
        if t.is_group_relation:
            ids = members(t.target)
            if len(ids) < 2:
                continue
            if t.relation == "in-a-row":
                relations.append(Composite("in-a-row", tuple(Part(i) for i in ids)))
            else:
                for a, b in zip(ids, ids[1:]):
                    relations.append(Composite(t.relation, (Part(a), Part(b))))
            for a, b in zip(ids, ids[1:]):
                coherence.append(Atomic("near", Part(a), Part(b), th.d_coherence))
            continue
        target, reference = operand(t.target), operand(t.reference)
        if t.relation in ATOMIC_RELATIONS:
            relations.append(Atomic(t.relation, target, reference))
        elif t.relation in COMPOSITE_RELATIONS:
            relations.append(Composite(t.relation, (target, reference)))
        else:
            raise ValueError(f"unknown relation {t.relation!r}")
        coherence.append(Atomic("near", target, reference, th.d_coherence))

    # one node per pair so decided pairs need not be re-checked
    tail: list[Node] = [
        Exclusive((i, j)) for i in range(len(refs)) for j in range(i + 1, len(refs))
    ]
    root = And(tuple(priors + relations + coherence + tail))
    return Constraint(objects, root, th, tuple(float(r) for r in room))


# ------------------------------------------------------- interval kernels
# Boxes are three axis tuples (p_lo, p_hi, q_lo, q_hi); p is the lowest and
# q the highest corner.  Intervals are passed as bare float pairs here.

def _lt(alo, ahi, blo, bhi) -> Tribool:
    if bhi <= alo:
        return F
    if ahi < blo:
        return T
    return M


def _le(alo, ahi, blo, bhi) -> Tribool:
    # a <= b, closed up to GEOM_EPS
    if ahi <= blo + GEOM_EPS:
        return T
    if alo > bhi + GEOM_EPS:
        return F
    return M


def _eq(alo, ahi, blo, bhi, tol) -> Tribool:
    tol += GEOM_EPS
    dlo, dhi = alo - bhi, ahi - blo
    if dlo > tol or dhi < -tol:
        return F
    if dlo >= -tol and dhi <= tol:
        return T
    return M


def _meet(*values: Tribool) -> Tribool:
    return all_of(values)


def _overlap(a, b) -> Tribool:
    # closed intersection along one axis
    r = _le(a[0], a[1], b[2], b[3])
    if r == F:
        return F
    s = _le(b[0], b[1], a[2], a[3])
    return r if r < s else s


def _separated(a, b) -> Tribool:
    r = _le(a[2], a[3], b[0], b[1])
    if r == T:
        return T
    s = _le(b[2], b[3], a[0], a[1])
    return r if r > s else s


def _center(a):
    return (0.5 * (a[0] + a[2]), 0.5 * (a[1] + a[3]))


def _center_in(bt, br) -> Tribool:
    out = T
    for axis in (0, 1):
        clo, chi = _center(bt[axis])
        r = br[axis]
        v = _le(r[0], r[1], clo, chi)
        if v == F:
            return F
        w = _le(clo, chi, r[2], r[3])
        if w == F:
            return F
        out = min(out, v, w)
    return out


# (axis, sign) of u for each orientation index
_DIRECTION = ((0, 1), (1, 1), (0, -1), (1, -1))


def _beyond(bt, br, k: int) -> Tribool:
    """Target lies entirely on the +u_k side of the reference."""
    axis, sign = _DIRECTION[k % 4]
    t, r = bt[axis], br[axis]
    if sign > 0:
        return _le(r[2], r[3], t[0], t[1])
    return _le(t[2], t[3], r[0], r[1])


def _inflate(box, dist):
    return tuple((a[0] - dist, a[1] - dist, a[2] + dist, a[3] + dist) for a in box)


def _eval_atomic(rel, bt, st, br, sr, kr, th: RelationThresholds) -> Tribool:
    if rel == "front":
        return _beyond(bt, br, kr)
    if rel == "behind":
        return _beyond(br, bt, kr)
    if rel == "left":
        return _beyond(bt, br, kr - 1)
    if rel == "right":
        return _beyond(br, bt, kr - 1)
    if rel == "on":
        tz = bt[2]
        r = _eq(tz[0], tz[1], sr[0], sr[1], th.contact_tol)
        if r == F:
            return F
        return min(r, _center_in(bt, br))
    if rel == "above":
        tz, rz = bt[2], br[2]
        a = _le(rz[2] + th.d_min_above, rz[3] + th.d_min_above, tz[0], tz[1])
        if a == F:
            return F
        b = _le(tz[0], tz[1], rz[2] + th.d_max_above, rz[3] + th.d_max_above)
        if b == F:
            return F
        return min(a, b, _center_in(bt, br))
    if rel == "under":
        a = _lt(st[0], st[1], sr[0], sr[1])
        if a == F:
            return F
        return min(a, _overlap(bt[0], br[0]), _overlap(bt[1], br[1]))
    raise ValueError(f"unknown relation {rel!r}")


def _near_offsets(size, offset, extent, k, dist):
    """Reference cuboid enlarged by ``dist * e_theta`` at both corners."""
    p, q = box_offsets(size, offset, extent, k, raw=True)
    e = AxisFrame.of(k).e
    p2 = tuple(a - dist * b for a, b in zip(p, e))
    q2 = tuple(a + dist * b for a, b in zip(q, e))
    return tuple(min(a, b) for a, b in zip(p2, q2)), tuple(max(a, b) for a, b in zip(p2, q2))


class _Context:
    """Per-evaluation cache of object geometry for one layout box."""

    def __init__(self, c: Constraint, s: LayoutState):
        if s.n != c.n:
            raise ValueError(f"layout has {s.n} objects, constraint expects {c.n}")
        self.c = c
        self.lo = s.lo
        self.hi = s.hi
        self.ks = [s.orientations(i) for i in range(c.n)]
        self._boxes: dict = {}
        self._hulls: dict = {}
        self._parts: dict = {}

    def _part_geometry(self, i, part):
        model = self.c.objects[i].model
        if part is None:
            return model.base.size, (0.0, 0.0, 0.0), model.base.size
        sub = model.named_part(part)
        return model.base.size, sub.offset, sub.size

    def box(self, i: int, part: Optional[str], k: int, inflate: float = 0.0):
        key = (i, part, k, inflate)
        b = self._boxes.get(key)
        if b is None:
            size, off, ext = self._part_geometry(i, part)
            if inflate:
                lo, hi = _near_offsets(size, off, ext, k, inflate)
            else:
                lo, hi = box_offsets(size, off, ext, k)
            L, H = self.lo, self.hi
            j = 4 * i
            b = tuple(
                (L[j + a] + lo[a], H[j + a] + lo[a], L[j + a] + hi[a], H[j + a] + hi[a])
                for a in range(3)
            )
            self._boxes[key] = b
        return b

    def hull(self, i: int, part: Optional[str] = None, inflate: float = 0.0):
        """Box over all orientations the layout allows for object ``i``."""
        key = (i, part, inflate)
        h = self._hulls.get(key)
        if h is None:
            boxes = [self.box(i, part, k, inflate) for k in self.ks[i]]
            h = _hull_boxes(boxes)
            self._hulls[key] = h
        return h

    def parts(self, i: int):
        """Sub-cuboid boxes of object ``i``, each hulled over orientations."""
        p = self._parts.get(i)
        if p is None:
            p = self._parts[i] = _object_parts(self, i, self.c.objects[i].model)
        return p

    def support(self, op: Operand):
        if isinstance(op, Group):
            sups = [self.support(Part(m)) for m in op.members]
            return (max(s[0] for s in sups), max(s[1] for s in sups))
        model = self.c.objects[op.index].model
        s = model.part_support(op.part)
        j = 4 * op.index + 2
        return (self.lo[j] + s, self.hi[j] + s)

    def orientation_choices(self, op: Operand):
        if isinstance(op, Group):
            return self.ks[op.members[0]]
        return self.ks[op.index]

    def geometry(self, op: Operand, k: Optional[int], inflate: float = 0.0):
        if isinstance(op, Group):
            return _hull_boxes([self.hull(m, None, inflate) for m in op.members])
        return self.box(op.index, op.part, k, inflate)


def _hull_boxes(boxes):
    if len(boxes) == 1:
        return boxes[0]
    return tuple(
        (min(b[a][0] for b in boxes), max(b[a][1] for b in boxes),
         min(b[a][2] for b in boxes), max(b[a][3] for b in boxes))
        for a in range(3)
    )


def _eval_pair(ctx: _Context, rel: str, t: Operand, r: Operand, dist: Optional[float]) -> Tribool:
    th = ctx.c.thresholds
    if rel == "near":
        dist = th.d_near if dist is None else dist
    st, sr = ctx.support(t), ctx.support(r)
    kts = [None] if isinstance(t, Group) else ctx.ks[t.index]
    krs = ctx.orientation_choices(r)
    group_ref = isinstance(r, Group)
    results = []
    for kr in krs:
        if rel == "near":
            br = _inflate(ctx.geometry(r, None), dist) if group_ref else ctx.geometry(r, kr, dist)
        else:
            br = ctx.geometry(r, None if group_ref else kr)
        for kt in kts:
            bt = ctx.geometry(t, kt)
            if rel == "near":
                v = _meet(*(_overlap(bt[a], br[a]) for a in range(3)))
            else:
                v = _eval_atomic(rel, bt, st, br, sr, kr, th)
            if v == M:
                return M
            results.append(v)
    return agree(results)


def _same_orientation(ka: Sequence[int], kb: Sequence[int]) -> Tribool:
    if len(ka) == 1 and len(kb) == 1:
        return T if ka[0] == kb[0] else F
    if not set(ka) & set(kb):
        return F
    return M


def _first(op: Operand) -> int:
    return op.members[0] if isinstance(op, Group) else op.index


def _eval_composite(ctx: _Context, node: Composite) -> Tribool:
    ops = node.operands
    if node.relation == "next-to":
        if len(ops) != 2:
            raise ValueError("next-to takes two operands")
        return any_of((_eval_pair(ctx, "left", ops[0], ops[1], None),
                       _eval_pair(ctx, "right", ops[0], ops[1], None)))
    if node.relation == "side-by-side":
        if len(ops) != 2:
            raise ValueError("side-by-side takes two operands")
        a = _same_orientation(ctx.ks[_first(ops[0])], ctx.ks[_first(ops[1])])
        if a == F:
            return F
        return min(a, _eval_pair(ctx, "near", ops[0], ops[1], None))
    if node.relation == "in-a-row":
        if len(ops) < 2:
            raise ValueError("in-a-row takes at least two operands")
        out = T
        for a, b in zip(ops, ops[1:]):
            v = _same_orientation(ctx.ks[_first(a)], ctx.ks[_first(b)])
            if v != F:
                v = min(v, _eval_pair(ctx, "right", a, b, None))
            if v == F:
                return F
            out = min(out, v)
        return out
    raise ValueError(f"unknown composite relation {node.relation!r}")


def _eval_prior(ctx: _Context, node: Prior) -> Tribool:
    i = node.index
    tol = ctx.c.thresholds.contact_tol
    if node.kind == "ground":
        j = 4 * i + 2
        return _eq(ctx.lo[j], ctx.hi[j], 0.0, 0.0, tol)
    results = []
    for k in ctx.ks[i]:
        b = ctx.box(i, None, k)
        if node.kind == "room":
            v = T
            for a in range(3):
                v = min(v, _le(0.0, 0.0, b[a][0], b[a][1]),
                        _le(b[a][2], b[a][3], ctx.c.room[a], ctx.c.room[a]))
                if v == F:
                    break
        elif node.kind == "wall":
            # back face flush with x = 0 (facing +x) or y = 0 (facing +y)
            if k == 0:
                v = _eq(b[0][0], b[0][1], 0.0, 0.0, tol)
            elif k == 1:
                v = _eq(b[1][0], b[1][1], 0.0, 0.0, tol)
            else:
                v = F
        else:
            raise ValueError(f"unknown prior {node.kind!r}")
        if v == M:
            return M
        results.append(v)
    return agree(results)


def _eval_exclusive(ctx: _Context, node: Exclusive) -> Tribool:
    parts = {}
    out = T
    idx = node.indices
    for x, i in enumerate(idx):
        for j in idx[x + 1:]:
            bi, bj = ctx.hull(i), ctx.hull(j)
            if any(_separated(bi[a], bj[a]) == T for a in range(3)):
                continue
            for i_ in (i, j):
                if i_ not in parts:
                    parts[i_] = ctx.parts(i_)
            for pa in parts[i]:
                for pb in parts[j]:
                    v = F
                    for a in range(3):
                        s = _separated(pa[a], pb[a])
                        if s > v:
                            v = s
                            if v == T:
                                break
                    if v == F:
                        return F
                    if v < out:
                        out = v
    return out


def _object_parts(ctx: _Context, i: int, model: ObjectModel):
    size = model.base.size
    out = []
    for part in model.parts:
        boxes = []
        for k in ctx.ks[i]:
            lo, hi = box_offsets(size, part.offset, part.size, k)
            j = 4 * i
            boxes.append(tuple(
                (ctx.lo[j + a] + lo[a], ctx.hi[j + a] + lo[a], ctx.lo[j + a] + hi[a], ctx.hi[j + a] + hi[a])
                for a in range(3)
            ))
        out.append(_hull_boxes(boxes))
    return out


def _eval_node(ctx: _Context, node) -> Tribool:
    if isinstance(node, And):
        out = T
        for c in node.children:
            v = _eval_node(ctx, c)
            if v == F:
                return F
            if v < out:
                out = v
        return out
    if isinstance(node, Or):
        out = F
        for c in node.children:
            v = _eval_node(ctx, c)
            if v == T:
                return T
            if v > out:
                out = v
        return out
    if isinstance(node, Atomic):
        return _eval_pair(ctx, node.relation, node.target, node.reference, node.distance)
    if isinstance(node, Composite):
        return _eval_composite(ctx, node)
    if isinstance(node, Prior):
        return _eval_prior(ctx, node)
    if isinstance(node, SameOrientation):
        return _same_orientation(ctx.ks[node.a], ctx.ks[node.b])
    if isinstance(node, Exclusive):
        return _eval_exclusive(ctx, node)
    raise TypeError(f"not a constraint node: {node!r}")


def eval(c: Constraint, layout: LayoutState, node=None) -> Tribool:
    """Evaluate the constraint (or one of its nodes) on an interval layout."""
    ctx = _Context(c, layout)
    if any(not ks for ks in ctx.ks):
        return F
    return _eval_node(ctx, c.root if node is None else node)


def eval_pending(c: Constraint, layout: LayoutState,
                 pending: Optional[Sequence[int]] = None) -> tuple[Tribool, tuple[int, ...]]:
    """Evaluate the root's children listed in ``pending``.

    Returns the overall value and the children that are still undecided.
    Children found ``TRUE`` on a box stay ``TRUE`` on every sub-box, so a
    search can pass the returned tuple down to the halves of a split.
    """
    ctx = _Context(c, layout)
    if any(not ks for ks in ctx.ks):
        return F, ()
    children = c.root.children
    if pending is None:
        pending = range(len(children))
    left = []
    for k in pending:
        v = _eval_node(ctx, children[k])
        if v == F:
            return F, ()
        if v == M:
            left.append(k)
    return (M if left else T), tuple(left)


def eval_atomic(rel: str, target, reference, th: Optional[RelationThresholds] = None) -> Tribool:
    """Evaluate one atomic relation on explicit geometry.

    ``target`` and ``reference`` are ``(CornerPair, support Interval, d Interval)``
    triples as produced by :mod:`layoutsearch.scene_model`.
    """
    th = th or RelationThresholds()
    if rel not in ATOMIC_RELATIONS:
        raise ValueError(f"unknown relation {rel!r}")
    ct, st, _ = target
    cr, sr, dr = reference
    bt = _corner_box(ct)
    br = _corner_box(cr)
    ks = orientation_indices(dr)
    if not ks:
        return F
    results = []
    for k in ks:
        if rel == "near":
            big = _inflate(br, th.d_near)
            v = _meet(*(_overlap(bt[a], big[a]) for a in range(3)))
        else:
            v = _eval_atomic(rel, bt, (st.lo, st.hi), br, (sr.lo, sr.hi), k, th)
        if v == M:
            return M
        results.append(v)
    return agree(results)


def _corner_box(cp):
    return tuple((cp.p[a].lo, cp.p[a].hi, cp.q[a].lo, cp.q[a].hi) for a in range(3))


def exclusive(boxes: Sequence[Sequence]) -> Tribool:
    """Pairwise disjointness of objects given as lists of part CornerPairs."""
    parts = [[_corner_box(cp) for cp in obj] for obj in boxes]
    out = T
    for x in range(len(parts)):
        for y in range(x + 1, len(parts)):
            for pa in parts[x]:
                for pb in parts[y]:
                    v = any_of(_separated(pa[a], pb[a]) for a in range(3))
                    if v == F:
                        return F
                    out = min(out, v)
    return out


# ---------------------------------------------------- difference bounds
# Pairwise bounds L <= v_i - v_j <= U on pose coordinates implied by a node,
# keyed by (i, j, axis) with i < j.

INF = math.inf


def _put(out, i, j, axis, lo, hi):
    if i == j:
        return
    if i > j:
        i, j, lo, hi = j, i, -hi, -lo
    key = (i, j, axis)
    if key in out:
        a, b = out[key]
        out[key] = (max(a, lo), min(b, hi))
    else:
        out[key] = (lo, hi)


def _hull_bounds(sets: Iterable[dict]) -> dict:
    sets = list(sets)
    if not sets:
        return {}
    keys = set(sets[0])
    for s in sets[1:]:
        keys &= set(s)
    out = {}
    for key in keys:
        out[key] = (min(s[key][0] for s in sets), max(s[key][1] for s in sets))
    return {k: v for k, v in out.items() if not (v[0] == -INF and v[1] == INF)}


def _meet_bounds(sets: Iterable[dict]) -> dict:
    out: dict = {}
    for s in sets:
        for (i, j, a), (lo, hi) in s.items():
            _put(out, i, j, a, lo, hi)
    return out


def _offsets(c: Constraint, op: Part, k: int, inflate: float = 0.0):
    model = c.objects[op.index].model
    size = model.base.size
    if op.part is None:
        off, ext = (0.0, 0.0, 0.0), size
    else:
        sub = model.named_part(op.part)
        off, ext = sub.offset, sub.size
    if inflate:
        return _near_offsets(size, off, ext, k, inflate)
    return box_offsets(size, off, ext, k)


def _atomic_bounds(c: Constraint, rel: str, t: Part, r: Part, kt: int, kr: int,
                   dist: Optional[float]) -> dict:
    th = c.thresholds
    i, j = t.index, r.index
    Pt, Qt = _offsets(c, t, kt)
    out: dict = {}
    if rel == "near":
        d = th.d_near if dist is None else dist
        Pr, Qr = _offsets(c, r, kr, d)
        for a in range(3):
            _put(out, i, j, a, Pr[a] - Qt[a], Qr[a] - Pt[a])
        return out
    Pr, Qr = _offsets(c, r, kr)
    if rel in ("on", "above"):
        for a in (0, 1):
            ct = 0.5 * (Pt[a] + Qt[a])
            _put(out, i, j, a, Pr[a] - ct, Qr[a] - ct)
        if rel == "on":
            s = c.objects[j].model.part_support(r.part)
            tol = th.contact_tol
            _put(out, i, j, 2, s - Pt[2] - tol, s - Pt[2] + tol)
        else:
            _put(out, i, j, 2, Qr[2] + th.d_min_above - Pt[2], Qr[2] + th.d_max_above - Pt[2])
        return out
    if rel == "under":
        for a in (0, 1):
            _put(out, i, j, a, Pr[a] - Qt[a], Qr[a] - Pt[a])
        st = c.objects[i].model.part_support(t.part)
        sr = c.objects[j].model.part_support(r.part)
        _put(out, i, j, 2, -INF, sr - st)
        return out
    if rel in ("front", "behind", "left", "right"):
        k = kr if rel in ("front", "behind") else kr - 1
        axis, sign = _DIRECTION[k % 4]
        beyond = rel in ("front", "left")
        if (sign > 0) == beyond:
            # target entirely on the positive side of the reference
            _put(out, i, j, axis, Qr[axis] - Pt[axis], INF)
        else:
            _put(out, i, j, axis, -INF, Pr[axis] - Qt[axis])
        return out
    raise ValueError(f"unknown relation {rel!r}")


def _pair_bounds(c, rel, t, r, ks, dist=None) -> dict:
    if not isinstance(t, Part) or not isinstance(r, Part) or t.index == r.index:
        return {}
    combos = [
        _atomic_bounds(c, rel, t, r, kt, kr, dist)
        for kt, kr in product(ks[t.index], ks[r.index])
    ]
    return _hull_bounds(combos)


def node_bounds(c: Constraint, node, ks: Sequence[Sequence[int]]) -> dict:
    """Difference bounds implied by ``node`` for the given orientation sets."""
    if isinstance(node, And):
        return _meet_bounds(node_bounds(c, ch, ks) for ch in node.children)
    if isinstance(node, Or):
        return _hull_bounds(node_bounds(c, ch, ks) for ch in node.children)
    if isinstance(node, Atomic):
        return _pair_bounds(c, node.relation, node.target, node.reference, ks, node.distance)
    if isinstance(node, Composite):
        ops = node.operands
        if node.relation == "next-to":
            return _hull_bounds([_pair_bounds(c, "left", ops[0], ops[1], ks),
                                 _pair_bounds(c, "right", ops[0], ops[1], ks)])
        if node.relation == "side-by-side":
            return _pair_bounds(c, "near", ops[0], ops[1], ks)
        if node.relation == "in-a-row":
            return _meet_bounds(_pair_bounds(c, "right", a, b, ks) for a, b in zip(ops, ops[1:]))
    return {}


# ------------------------------------------------------ point evaluation

def holds(c: Constraint, values: Sequence[float]) -> bool:
    """Evaluate the constraint at a single layout (4 numbers per object)."""
    v = eval(c, LayoutState.point(values))
    if v == M:
        raise AssertionError("point evaluation must be decided")
    return v == T


def relation_report(c: Constraint, layout: LayoutState) -> list[tuple[str, Tribool]]:
    """Per-node outcomes, for diagnostics."""
    out = []
    for node in c.root.children:
        out.append((describe(c, node), eval(c, layout, node)))
    return out


def describe(c: Constraint, node) -> str:
    names = c.names()

    def op(o):
        if isinstance(o, Group):
            return "group(" + ",".join(names[m] for m in o.members) + ")"
        return names[o.index] + (f":{o.part}" if o.part else "")

    if isinstance(node, Atomic):
        extra = f" [{node.distance} m]" if node.distance is not None else ""
        return f"{node.relation}({op(node.target)}, {op(node.reference)}){extra}"
    if isinstance(node, Composite):
        return f"{node.relation}(" + ", ".join(op(o) for o in node.operands) + ")"
    if isinstance(node, Prior):
        return f"{node.kind}({names[node.index]})"
    if isinstance(node, SameOrientation):
        return f"same-orientation({names[node.a]}, {names[node.b]})"
    if isinstance(node, Exclusive):
        return "exclusive(" + ", ".join(names[i] for i in node.indices) + ")"
    return type(node).__name__
