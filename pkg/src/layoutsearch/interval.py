"""Closed real intervals and three-valued logic.

Every constraint in the layout solver is evaluated over boxes of intervals and
returns a :class:`Tribool`.  ``TRUE`` means the constraint holds for every point
of the box, ``FALSE`` means it holds for none, ``MAYBE`` means undecided.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional


class Tribool(enum.IntEnum):
    FALSE = 0
    MAYBE = 1
    TRUE = 2

    def encode(self) -> tuple[int, int]:
        """Logical-interval form: [0,0], [0,1] or [1,1]."""
        return _ENCODING[self]

    @classmethod
    def decode(cls, pair: tuple[int, int]) -> "Tribool":
        lo, hi = pair
        for value, enc in _ENCODING.items():
            if enc == (lo, hi):
                return value
        raise ValueError(f"not a logical interval: {pair!r}")

    @classmethod
    def of(cls, flag: bool) -> "Tribool":
        return cls.TRUE if flag else cls.FALSE


_ENCODING = {
    Tribool.FALSE: (0, 0),
    Tribool.MAYBE: (0, 1),
    Tribool.TRUE: (1, 1),
}


def meet(a: Tribool, b: Tribool) -> Tribool:
    return a if a <= b else b


def join(a: Tribool, b: Tribool) -> Tribool:
    return a if a >= b else b


def negate(a: Tribool) -> Tribool:
    return Tribool(2 - a)


def all_of(values: Iterable[Tribool]) -> Tribool:
    out = Tribool.TRUE
    for v in values:
        if v == Tribool.FALSE:
            return Tribool.FALSE
        if v < out:
            out = v
    return out


def any_of(values: Iterable[Tribool]) -> Tribool:
    out = Tribool.FALSE
    for v in values:
        if v == Tribool.TRUE:
            return Tribool.TRUE
        if v > out:
            out = v
    return out


def agree(values: Iterable[Tribool]) -> Tribool:
    """Outcome over a union of boxes: decided only if every part agrees."""
    out = None
    for v in values:
        if v == Tribool.MAYBE:
            return Tribool.MAYBE
        if out is None:
            out = v
        elif out != v:
            return Tribool.MAYBE
    if out is None:
        raise ValueError("agree() of an empty collection")
    return out


@dataclass(frozen=True, slots=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, v: float) -> "Interval":
        return cls(v, v)

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def contains(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def __add__(self, other):
        if isinstance(other, Interval):
            return add(self, other)
        return Interval(self.lo + other, self.hi + other)

    def __sub__(self, other):
        if isinstance(other, Interval):
            return sub(self, other)
        return Interval(self.lo - other, self.hi - other)

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __repr__(self) -> str:
        return f"[{self.lo:g}, {self.hi:g}]"


def add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo - b.hi, a.hi - b.lo)


def scale_shift(a: Interval, k: float, c: float = 0.0) -> Interval:
    """{k*x + c : x in a}."""
    if k >= 0:
        return Interval(k * a.lo + c, k * a.hi + c)
    return Interval(k * a.hi + c, k * a.lo + c)


def lt(a: Interval, b: Interval) -> Tribool:
    if b.hi <= a.lo:
        return Tribool.FALSE
    if a.hi < b.lo:
        return Tribool.TRUE
    return Tribool.MAYBE


def le(a: Interval, b: Interval) -> Tribool:
    """a <= b, the complement of b < a."""
    return negate(lt(b, a))


def eq_tol(a: Interval, b: Interval, eps: float) -> Tribool:
    """|x - y| <= eps for x in a, y in b."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    d = sub(a, b)
    if d.lo > eps or d.hi < -eps:
        return Tribool.FALSE
    if -eps <= d.lo and d.hi <= eps:
        return Tribool.TRUE
    return Tribool.MAYBE


def imin(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), min(a.hi, b.hi))


def imax(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.lo, b.lo), max(a.hi, b.hi))


def hull(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def intersect(a: Interval, b: Interval) -> Optional[Interval]:
    """Overlap of two intervals, or ``None`` when they are disjoint."""
    lo = max(a.lo, b.lo)
    hi = min(a.hi, b.hi)
    if lo > hi:
        return None
    return Interval(lo, hi)


def width(a: Interval) -> float:
    return a.hi - a.lo


def midpoint(a: Interval) -> float:
    return 0.5 * (a.lo + a.hi)


def split(a: Interval) -> tuple[Interval, Interval]:
    m = midpoint(a)
    return Interval(a.lo, m), Interval(m, a.hi)
