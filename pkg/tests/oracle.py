"""Reference implementations used only by the tests.

Relations are written straight from their inequality definitions on the
rotated corner pair, without the package's interval kernels.  All functions
accept floats or numpy arrays that broadcast together.
"""
from __future__ import annotations

import functools
import itertools
import math

import numpy as np

EPS = 1e-9
_CS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def cos_sin(k):
    return _CS[k % 4]


def corners(x, y, z, k, size):
    """Rotated (unsorted) lowest and highest corners of a posed cuboid.

    The pose is the lowest corner of the unrotated cuboid; rotation is about
    the vertical axis through the cuboid centre.
    """
    lx, ly, lz = size
    c, s = cos_sin(k)
    cx, cy, cz = x + lx / 2, y + ly / 2, z + lz / 2
    p = (cx + c * (-lx / 2) - s * (-ly / 2), cy + s * (-lx / 2) + c * (-ly / 2), cz - lz / 2)
    q = (cx + c * (lx / 2) - s * (ly / 2), cy + s * (lx / 2) + c * (ly / 2), cz + lz / 2)
    return p, q


def bounds(p, q):
    lo = tuple(np.minimum(a, b) for a, b in zip(p, q))
    hi = tuple(np.maximum(a, b) for a, b in zip(p, q))
    return lo, hi


def dot(u, v):
    return u[0] * v[0] + u[1] * v[1]


def u_theta(k):
    return cos_sin(k)


class Obj:
    """A posed single-cuboid object."""

    def __init__(self, x, y, z, k, size, support):
        self.x, self.y, self.z, self.k = x, y, z, k
        self.size = size
        self.p, self.q = corners(x, y, z, k, size)
        self.lo, self.hi = bounds(self.p, self.q)
        self.zs = z + support * size[2]


def _proj(o, u):
    a, b = dot(u, o.p), dot(u, o.q)
    return np.minimum(a, b), np.maximum(a, b)


def front(t, r):
    u = u_theta(r.k)
    tmin, _ = _proj(t, u)
    _, rmax = _proj(r, u)
    return tmin >= rmax - EPS


def behind(t, r):
    u = u_theta(r.k)
    _, tmax = _proj(t, u)
    rmin, _ = _proj(r, u)
    return tmax <= rmin + EPS


def left(t, r):
    u = u_theta(r.k - 1)
    tmin, _ = _proj(t, u)
    _, rmax = _proj(r, u)
    return tmin >= rmax - EPS


def right(t, r):
    u = u_theta(r.k - 1)
    _, tmax = _proj(t, u)
    rmin, _ = _proj(r, u)
    return tmax <= rmin + EPS


def _center_in_xy(t, r):
    cx = (t.p[0] + t.q[0]) / 2
    cy = (t.p[1] + t.q[1]) / 2
    return ((cx >= r.lo[0] - EPS) & (cx <= r.hi[0] + EPS)
            & (cy >= r.lo[1] - EPS) & (cy <= r.hi[1] + EPS))


def on(t, r, tol=0.0):
    return (np.abs(t.lo[2] - r.zs) <= tol + EPS) & _center_in_xy(t, r)


def above(t, r, dmin=0.25, dmax=0.5):
    z = t.lo[2]
    return (z >= r.hi[2] + dmin - EPS) & (z <= r.hi[2] + dmax + EPS) & _center_in_xy(t, r)


def under(t, r):
    ov = ((t.lo[0] <= r.hi[0] + EPS) & (r.lo[0] <= t.hi[0] + EPS)
          & (t.lo[1] <= r.hi[1] + EPS) & (r.lo[1] <= t.hi[1] + EPS))
    return (t.zs < r.zs) & ov


def near(t, r, d=0.5):
    c, s = cos_sin(r.k)
    e = (c - s, s + c, 1.0)
    a = tuple(pv - d * ev for pv, ev in zip(r.p, e))
    b = tuple(qv + d * ev for qv, ev in zip(r.q, e))
    lo, hi = bounds(a, b)
    out = True
    for ax in range(3):
        out = out & (t.lo[ax] <= hi[ax] + EPS) & (lo[ax] <= t.hi[ax] + EPS)
    return out


def disjoint(a, b):
    out = False
    for ax in range(3):
        out = out | (a.hi[ax] <= b.lo[ax] + EPS) | (b.hi[ax] <= a.lo[ax] + EPS)
    return out


def in_room(o, room):
    out = True
    for ax in range(3):
        out = out & (o.lo[ax] >= -EPS) & (o.hi[ax] <= room[ax] + EPS)
    return out


RELATIONS = {"front": front, "behind": behind, "left": left, "right": right,
             "on": on, "above": above, "under": under, "near": near}


# ------------------------------------------------------------ matching

def box_iou(a, b):
    """Intersection over union via explicit area arithmetic."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    ix = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    iy = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = ix * iy
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def exhaustive_assignment(gain):
    """Best one-to-one partial assignment, exact over all detection subsets."""
    n, m = gain.shape

    @functools.lru_cache(maxsize=None)
    def best(i, used):
        if i == n:
            return 0.0
        out = best(i + 1, used)
        for j in range(m):
            if not used >> j & 1:
                out = max(out, gain[i, j] + best(i + 1, used | 1 << j))
        return out

    return best(0, 0)


def permutation_assignment(gain):
    """Best partial matching by enumerating every injective row -> column map."""
    n, m = gain.shape
    cols = list(range(m)) + [None] * n
    best = 0.0
    for perm in set(itertools.permutations(cols, n)):
        best = max(best, sum(gain[i, j] for i, j in enumerate(perm) if j is not None))
    return best


def median(values):
    v = sorted(values)
    n = len(v)
    return v[n // 2] if n % 2 else (v[n // 2 - 1] + v[n // 2]) / 2


def point_box_distance(point, lo, hi):
    d2 = 0.0
    for v, a, b in zip(point, lo, hi):
        g = max(a - v, 0.0, v - b)
        d2 += g * g
    return math.sqrt(d2)
