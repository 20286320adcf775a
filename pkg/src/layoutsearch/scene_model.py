"""Object categories as cuboids or cuboid sets, and pose-to-corner geometry.

A pose ``(x, y, z, d)`` places the object's lowest corner at ``(x, y, z)`` in
its unrotated frame and turns it by ``d`` about the vertical axis through the
cuboid centre.  Orientations are restricted to the four axis-aligned values,
which keeps the rotation matrix integral and interval rotation exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import yaml

from .interval import Interval, hull

ORIENTATIONS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
# (cos, sin) of each orientation, exact
_ROT = ((1, 0), (0, 1), (-1, 0), (0, -1))
_ANGLE_EPS = 1e-9

FLAGS = frozenset({"on_wall", "against_wall", "on_ground"})


def orientation_indices(d: Interval) -> tuple[int, ...]:
    """Indices of the discrete orientations contained in ``d``."""
    return _orientations_between(d.lo, d.hi)


@lru_cache(maxsize=4096)
def _orientations_between(lo: float, hi: float) -> tuple[int, ...]:
    return tuple(k for k, a in enumerate(ORIENTATIONS) if lo - _ANGLE_EPS <= a <= hi + _ANGLE_EPS)


def orientation_index(angle: float) -> int:
    k = round(angle / (math.pi / 2)) % 4
    if abs(angle - ORIENTATIONS[k]) > 1e-6 and abs(angle - ORIENTATIONS[k] - 2 * math.pi) > 1e-6:
        raise ValueError(f"{angle} is not an axis-aligned orientation")
    return k


def rotation(k: int) -> tuple[int, int]:
    return _ROT[k % 4]


@dataclass(frozen=True)
class CuboidSpec:
    l_x: float
    l_y: float
    l_z: float
    z_s: float

    def __post_init__(self) -> None:
        if min(self.l_x, self.l_y, self.l_z) <= 0:
            raise ValueError("cuboid extents must be positive")
        if not 0 <= self.z_s <= self.l_z + 1e-12:
            raise ValueError("supporting surface must lie within the cuboid")

    @property
    def size(self) -> tuple[float, float, float]:
        return (self.l_x, self.l_y, self.l_z)


@dataclass(frozen=True)
class SubCuboid:
    d_x: float
    d_y: float
    d_z: float
    l_x: float
    l_y: float
    l_z: float
    name: Optional[str] = None

    @property
    def offset(self) -> tuple[float, float, float]:
        return (self.d_x, self.d_y, self.d_z)

    @property
    def size(self) -> tuple[float, float, float]:
        return (self.l_x, self.l_y, self.l_z)

    @property
    def top(self) -> float:
        return self.d_z + self.l_z


@dataclass(frozen=True)
class _PartSpec:
    # offsets and sizes as fractions of the base extents
    offset: tuple[float, float, float]
    size: tuple[float, float, float]
    name: Optional[str] = None

    def realise(self, base: CuboidSpec) -> SubCuboid:
        ext = base.size
        off = tuple(f * e for f, e in zip(self.offset, ext))
        size = tuple(f * e for f, e in zip(self.size, ext))
        return SubCuboid(*off, *size, name=self.name)


@dataclass(frozen=True)
class ObjectModel:
    category: str
    base: CuboidSpec
    sub_cuboids: tuple[SubCuboid, ...] = ()
    regions: Mapping[str, SubCuboid] = field(default_factory=dict)
    flags: frozenset = frozenset()
    variants: Mapping[str, tuple[float, float, float]] = field(default_factory=dict)
    support_fraction: float = 1.0
    _parts: tuple[_PartSpec, ...] = ()
    _region_parts: Mapping[str, _PartSpec] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        category: str,
        size: Sequence[float],
        support: float = 1.0,
        flags: Iterable[str] = (),
        sub_cuboids: Sequence[Mapping] = (),
        regions: Optional[Mapping[str, Mapping]] = None,
        variants: Optional[Mapping[str, Mapping]] = None,
    ) -> "ObjectModel":
        flags = frozenset(flags)
        unknown = flags - FLAGS
        if unknown:
            raise ValueError(f"{category}: unknown flags {sorted(unknown)}")
        parts = tuple(
            _PartSpec(tuple(p["offset"]), tuple(p["size"]), p.get("name")) for p in sub_cuboids
        )
        region_parts = {
            name: _PartSpec(tuple(r["offset"]), tuple(r["size"]), name)
            for name, r in (regions or {}).items()
        }
        sizes = {name: tuple(v["size"]) for name, v in (variants or {}).items()}
        return cls._from_parts(category, tuple(size), support, flags, parts, region_parts, sizes)

    @classmethod
    def _from_parts(cls, category, size, support, flags, parts, region_parts, variants):
        base = CuboidSpec(size[0], size[1], size[2], support * size[2])
        return cls(
            category=category,
            base=base,
            sub_cuboids=tuple(p.realise(base) for p in parts),
            regions={n: p.realise(base) for n, p in region_parts.items()},
            flags=flags,
            variants=variants,
            support_fraction=support,
            _parts=parts,
            _region_parts=region_parts,
        )

    def resized(self, size: Sequence[float]) -> "ObjectModel":
        return self._from_parts(
            self.category, tuple(size), self.support_fraction, self.flags,
            self._parts, self._region_parts, self.variants,
        )

    def with_attributes(self, attributes: Iterable[str]) -> "ObjectModel":
        model = self
        for a in attributes:
            if a in self.variants:
                model = model.resized(self.variants[a])
        return model

    @property
    def parts(self) -> tuple[SubCuboid, ...]:
        """Sub-cuboids used for exclusivity; the base cuboid when there are none."""
        if self.sub_cuboids:
            return self.sub_cuboids
        b = self.base
        return (SubCuboid(0.0, 0.0, 0.0, b.l_x, b.l_y, b.l_z),)

    def part_names(self) -> set[str]:
        names = {s.name for s in self.sub_cuboids if s.name}
        return names | set(self.regions)

    def named_part(self, name: str) -> SubCuboid:
        if name in self.regions:
            return self.regions[name]
        for s in self.sub_cuboids:
            if s.name == name:
                return s
        raise KeyError(f"{self.category} has no sub-object {name!r}")

    def part_support(self, name: Optional[str]) -> float:
        """Supporting-surface offset above the object's lowest point."""
        if name is None or name in self.regions:
            return self.base.z_s
        return self.named_part(name).top


class ObjectLibrary(Mapping[str, ObjectModel]):
    def __init__(self, models: Mapping[str, ObjectModel]):
        self._models = dict(models)

    def __getitem__(self, category: str) -> ObjectModel:
        return self._models[category]

    def __iter__(self):
        return iter(self._models)

    def __len__(self) -> int:
        return len(self._models)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "ObjectLibrary":
        models = {}
        for name, entry in data["categories"].items():
            models[name] = ObjectModel.build(
                name,
                entry["size"],
                entry.get("support", 1.0),
                entry.get("flags", ()),
                entry.get("sub_cuboids", ()),
                entry.get("regions"),
                entry.get("variants"),
            )
        return cls(models)

    @classmethod
    def load(cls, path: Optional[Path | str] = None) -> "ObjectLibrary":
        if path is None:
            text = resources.files(__package__).joinpath("data/objects.yaml").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        return cls.from_mapping(yaml.safe_load(text))

    def model(self, category: str, attributes: Iterable[str] = ()) -> ObjectModel:
        return self[category].with_attributes(attributes)


_DEFAULT: Optional[ObjectLibrary] = None


def default_library() -> ObjectLibrary:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = ObjectLibrary.load()
    return _DEFAULT


@dataclass(frozen=True)
class Pose:
    x: Interval
    y: Interval
    z: Interval
    d: Interval

    @classmethod
    def at(cls, x: float, y: float, z: float, d: float) -> "Pose":
        return cls(Interval.point(x), Interval.point(y), Interval.point(z), Interval.point(d))


@dataclass(frozen=True)
class CornerPair:
    p: tuple[Interval, Interval, Interval]
    q: tuple[Interval, Interval, Interval]


@lru_cache(maxsize=None)
def box_offsets(
    size: tuple[float, float, float],
    offset: tuple[float, float, float],
    extent: tuple[float, float, float],
    k: int,
    raw: bool = False,
) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    """Corner offsets of a local box relative to the pose ``(x, y, z)``.

    ``size`` is the parent cuboid, ``offset``/``extent`` the local box inside
    it.  The box is rotated by orientation ``k`` about the parent's vertical
    centre line.  With ``raw`` the rotated images of the local min and max
    corners are returned unsorted.
    """
    c, s = rotation(k)
    cx, cy = size[0] / 2, size[1] / 2
    ax, ay = offset[0] - cx, offset[1] - cy
    bx, by = offset[0] + extent[0] - cx, offset[1] + extent[1] - cy
    px, py = c * ax - s * ay + cx, s * ax + c * ay + cy
    qx, qy = c * bx - s * by + cx, s * bx + c * by + cy
    pz, qz = offset[2], offset[2] + extent[2]
    if raw:
        return (px, py, pz), (qx, qy, qz)
    return (min(px, qx), min(py, qy), pz), (max(px, qx), max(py, qy), qz)


def _corners_for(pose: Pose, size, offset, extent) -> Optional[CornerPair]:
    ks = orientation_indices(pose.d)
    if not ks:
        return None
    base = (pose.x, pose.y, pose.z)
    result = None
    for k in ks:
        lo, hi = box_offsets(size, offset, extent, k)
        p = tuple(b + o for b, o in zip(base, lo))
        q = tuple(b + o for b, o in zip(base, hi))
        if result is None:
            result = (p, q)
        else:
            result = (
                tuple(hull(a, b) for a, b in zip(result[0], p)),
                tuple(hull(a, b) for a, b in zip(result[1], q)),
            )
    return CornerPair(*result)


def corners(pose: Pose, spec: CuboidSpec) -> Optional[CornerPair]:
    """Lowest and highest corner of the posed cuboid.

    Returns ``None`` when ``pose.d`` holds none of the four orientations.
    """
    return _corners_for(pose, spec.size, (0.0, 0.0, 0.0), spec.size)


def sub_corners(pose: Pose, model: ObjectModel, k: int) -> Optional[CornerPair]:
    part = model.parts[k]
    return _corners_for(pose, model.base.size, part.offset, part.size)


def part_corners(pose: Pose, model: ObjectModel, name: str) -> Optional[CornerPair]:
    part = model.named_part(name)
    return _corners_for(pose, model.base.size, part.offset, part.size)


def support_height(pose: Pose, model: ObjectModel, part: Optional[str] = None) -> Interval:
    return pose.z + model.part_support(part)


@dataclass(frozen=True)
class LayoutState:
    """Interval box over all object poses, flattened as (x, y, z, d) per object."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi) or len(self.lo) % 4:
            raise ValueError("layout state needs 4 bounds per object")

    @property
    def n(self) -> int:
        return len(self.lo) // 4

    @classmethod
    def from_poses(cls, poses: Sequence[Pose]) -> "LayoutState":
        lo, hi = [], []
        for p in poses:
            for iv in (p.x, p.y, p.z, p.d):
                lo.append(float(iv.lo))
                hi.append(float(iv.hi))
        return cls(tuple(lo), tuple(hi))

    @classmethod
    def point(cls, values: Sequence[float]) -> "LayoutState":
        v = tuple(float(x) for x in values)
        return cls(v, v)

    def interval(self, k: int) -> Interval:
        return Interval(self.lo[k], self.hi[k])

    def pose(self, i: int) -> Pose:
        return Pose(*(self.interval(4 * i + a) for a in range(4)))

    def poses(self) -> list[Pose]:
        return [self.pose(i) for i in range(self.n)]

    def orientations(self, i: int) -> tuple[int, ...]:
        return _orientations_between(self.lo[4 * i + 3], self.hi[4 * i + 3])

    @property
    def is_degenerate(self) -> bool:
        return all(a == b for a, b in zip(self.lo, self.hi))

    def contains(self, other: "LayoutState") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))
