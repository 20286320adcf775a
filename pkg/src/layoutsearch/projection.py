"""Camera sampling and pinhole projection of concrete layouts to 2D boxes."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .relations import Constraint
from .scene_model import LayoutState, box_offsets, orientation_index, rotation

CAMERA_HEIGHT = 1.7
MIN_DISTANCE, MAX_DISTANCE = 5.0, 10.0
WALL_VIEW_LIMIT = math.radians(60.0)
NEAR_PLANE = 0.05
MIN_VISIBLE_FRACTION = 0.05


class ProjectionError(RuntimeError):
    """Base class for projection failures that callers report as a status."""


class CameraSamplingError(ProjectionError):
    pass


class DegenerateViewError(ProjectionError):
    pass


class NoReferenceError(ProjectionError):
    pass


@dataclass(frozen=True)
class Intrinsics:
    fov_deg: float = 60.0
    width: int = 640
    height: int = 480

    def __post_init__(self) -> None:
        if not 0 < self.fov_deg < 180:
            raise ValueError("field of view must be in (0, 180) degrees")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")

    @property
    def focal(self) -> float:
        return (self.width / 2) / math.tan(math.radians(self.fov_deg) / 2)


@dataclass(frozen=True)
class CameraPose:
    x: float
    y: float
    yaw: float
    z: float = CAMERA_HEIGHT
    intrinsics: Intrinsics = field(default_factory=Intrinsics)

    @property
    def distance(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def forward(self) -> tuple[float, float]:
        return math.cos(self.yaw), math.sin(self.yaw)

    def to_dict(self) -> dict:
        i = self.intrinsics
        return {"x": self.x, "y": self.y, "z": self.z, "yaw": self.yaw,
                "fov_deg": i.fov_deg, "width": i.width, "height": i.height}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CameraPose":
        return cls(d["x"], d["y"], d["yaw"], d.get("z", CAMERA_HEIGHT),
                   Intrinsics(d.get("fov_deg", 60.0), d.get("width", 640), d.get("height", 480)))

    def camera_coords(self, point: Sequence[float]) -> tuple[float, float, float]:
        """(right, up, depth) of a world point."""
        c, s = self.forward
        dx, dy, dz = point[0] - self.x, point[1] - self.y, point[2] - self.z
        return dx * s - dy * c, dz, dx * c + dy * s

    def pixel(self, point: Sequence[float]) -> tuple[float, float]:
        r, u, d = self.camera_coords(point)
        return self._pixel(r, u, d)

    def _pixel(self, r: float, u: float, d: float) -> tuple[float, float]:
        f = self.intrinsics.focal
        return (self.intrinsics.width / 2 + f * r / d, self.intrinsics.height / 2 - f * u / d)


@dataclass(frozen=True)
class Box2D:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    category: str
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {self}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def to_dict(self) -> dict:
        return {"category": self.category, "x_min": self.x_min, "y_min": self.y_min,
                "x_max": self.x_max, "y_max": self.y_max, "confidence": self.confidence}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Box2D":
        return cls(float(d["x_min"]), float(d["y_min"]), float(d["x_max"]), float(d["y_max"]),
                   str(d["category"]), float(d.get("confidence", 1.0)))


@dataclass(frozen=True)
class ReferenceLayout:
    boxes: tuple[Box2D, ...]
    provenance: tuple[int, int] = (0, 0)
    camera: Optional[CameraPose] = None
    width: int = 640
    height: int = 480

    def __post_init__(self) -> None:
        if not self.boxes:
            raise ValueError("a reference layout needs at least one box")

    def to_dict(self) -> dict:
        return {
            "provenance": {"layout": self.provenance[0], "camera": self.provenance[1]},
            "camera": None if self.camera is None else self.camera.to_dict(),
            "width": self.width,
            "height": self.height,
            "boxes": [b.to_dict() for b in self.boxes],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReferenceLayout":
        prov = d.get("provenance", {})
        cam = d.get("camera")
        return cls(
            tuple(Box2D.from_dict(b) for b in d["boxes"]),
            (int(prov.get("layout", 0)), int(prov.get("camera", 0))),
            None if cam is None else CameraPose.from_dict(cam),
            int(d.get("width", 640)),
            int(d.get("height", 480)),
        )


@dataclass(frozen=True)
class PlacedObject:
    """One object of a concrete layout: pose ``(x, y, z)``, orientation index ``k``."""

    name: str
    category: str
    size: tuple[float, float, float]
    x: float
    y: float
    z: float
    k: int
    wall: bool = False

    def corners(self) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        p, q = box_offsets(self.size, (0.0, 0.0, 0.0), self.size, self.k)
        base = (self.x, self.y, self.z)
        return tuple(b + o for b, o in zip(base, p)), tuple(b + o for b, o in zip(base, q))

    def center(self) -> tuple[float, float, float]:
        p, q = self.corners()
        return tuple((a + b) / 2 for a, b in zip(p, q))

    @property
    def facing(self) -> tuple[int, int]:
        return rotation(self.k)


def placed_objects(c: Constraint, layout: LayoutState) -> list[PlacedObject]:
    """Concrete objects from a degenerate layout state."""
    out = []
    for i, o in enumerate(c.objects):
        x, y, z, d = (layout.lo[4 * i + a] for a in range(4))
        out.append(PlacedObject(o.name, o.ref.category, o.model.base.size, x, y, z,
                                orientation_index(d), o.wall))
    return out


def placed_from_record(record: Mapping) -> list[list[PlacedObject]]:
    """Concrete layouts from a solution file record."""
    meta = {o["name"]: o for o in record["objects"]}
    layouts = []
    for sol in record["solutions"]:
        objs = []
        for o in sol["objects"]:
            m = meta[o["name"]]
            s = o["sample"]
            objs.append(PlacedObject(o["name"], o["category"], tuple(m["size"]),
                                     s["x"], s["y"], s["z"], orientation_index(s["d"]),
                                     bool(m.get("wall", False))))
        layouts.append(objs)
    return layouts


def _centroid(layout: Sequence[PlacedObject]) -> tuple[float, float, float]:
    cs = [o.center() for o in layout]
    return tuple(sum(c[a] for c in cs) / len(cs) for a in range(3))


def wall_view_ok(cam: CameraPose, obj: PlacedObject) -> bool:
    """Viewing direction within 60 degrees of the wall object's face normal."""
    fx, fy = cam.forward
    ux, uy = obj.facing
    cosang = -(fx * ux + fy * uy)
    return cosang >= math.cos(WALL_VIEW_LIMIT) - 1e-12


def camera_valid(cam: CameraPose, layout: Sequence[PlacedObject]) -> bool:
    if not (cam.x > 0 and cam.y > 0):
        return False
    if not MIN_DISTANCE - 1e-9 <= cam.distance <= MAX_DISTANCE + 1e-9:
        return False
    cx, cy, _ = _centroid(layout)
    aim = math.atan2(cy - cam.y, cx - cam.x)
    if abs(math.remainder(aim - cam.yaw, 2 * math.pi)) > 1e-9:
        return False
    return all(wall_view_ok(cam, o) for o in layout if o.wall)


def sample_cameras(layout: Sequence[PlacedObject], count: int, seed: int = 0,
                   intrinsics: Optional[Intrinsics] = None, max_tries: int = 10000) -> list[CameraPose]:
    """Rejection-sample camera poses satisfying the placement heuristics."""
    if not layout:
        raise ValueError("layout is empty")
    intrinsics = intrinsics or Intrinsics()
    rng = random.Random(seed)
    cx, cy, _ = _centroid(layout)
    walls = [o for o in layout if o.wall]
    out = []
    tries = 0
    while len(out) < count:
        if tries >= max_tries:
            raise CameraSamplingError(
                f"found {len(out)} of {count} camera poses after {max_tries} tries"
            )
        tries += 1
        r = rng.uniform(MIN_DISTANCE, MAX_DISTANCE)
        phi = rng.uniform(0.0, math.pi / 2)
        x, y = r * math.cos(phi), r * math.sin(phi)
        if x <= 0 or y <= 0:
            continue
        cam = CameraPose(x, y, math.atan2(cy - y, cx - x), CAMERA_HEIGHT, intrinsics)
        if all(wall_view_ok(cam, o) for o in walls):
            out.append(cam)
    return out


_EDGES = [(a, b) for a in range(8) for b in range(a + 1, 8) if bin(a ^ b).count("1") == 1]


def _visible_points(cam: CameraPose, obj: PlacedObject):
    p, q = obj.corners()
    pts = [cam.camera_coords((q[0] if m & 1 else p[0], q[1] if m & 2 else p[1], q[2] if m & 4 else p[2]))
           for m in range(8)]
    vis = [v for v in pts if v[2] >= NEAR_PLANE]
    if len(vis) == 8:
        return pts
    if not vis:
        return []
    for a, b in _EDGES:
        da, db = pts[a][2] - NEAR_PLANE, pts[b][2] - NEAR_PLANE
        if (da < 0) != (db < 0):
            t = da / (da - db)
            vis.append(tuple(pts[a][k] + t * (pts[b][k] - pts[a][k]) for k in range(3)))
    return vis


def project_object(cam: CameraPose, obj: PlacedObject) -> Optional[Box2D]:
    """2D box of the object, clipped to the image; ``None`` if hidden or mostly off-screen."""
    pts = _visible_points(cam, obj)
    if not pts:
        return None
    px = [cam._pixel(*v) for v in pts]
    x0, x1 = min(u for u, _ in px), max(u for u, _ in px)
    y0, y1 = min(v for _, v in px), max(v for _, v in px)
    full = (x1 - x0) * (y1 - y0)
    W, H = cam.intrinsics.width, cam.intrinsics.height
    cx0, cx1 = max(x0, 0.0), min(x1, float(W))
    cy0, cy1 = max(y0, 0.0), min(y1, float(H))
    if cx0 >= cx1 or cy0 >= cy1 or full <= 0:
        return None
    if (cx1 - cx0) * (cy1 - cy0) < MIN_VISIBLE_FRACTION * full:
        return None
    return Box2D(cx0, cy0, cx1, cy1, obj.category, 1.0)


def project(layout: Sequence[PlacedObject], cam: CameraPose,
            provenance: tuple[int, int] = (0, 0)) -> ReferenceLayout:
    boxes = [b for b in (project_object(cam, o) for o in layout) if b is not None]
    if not boxes:
        raise DegenerateViewError("no object is visible from this camera")
    return ReferenceLayout(tuple(boxes), provenance, cam, cam.intrinsics.width, cam.intrinsics.height)


def generate_references(layouts: Sequence[Sequence[PlacedObject]], m: int = 5, v: int = 1,
                        seed: int = 0, intrinsics: Optional[Intrinsics] = None,
                        max_tries: int = 10000) -> list[ReferenceLayout]:
    """Project the first ``m`` layouts from ``v`` sampled cameras each."""
    if not layouts:
        raise ValueError("no layouts to project")
    if m < 1 or v < 1:
        raise ValueError("m and v must be at least 1")
    refs = []
    for li, layout in enumerate(layouts[:m]):
        try:
            cams = sample_cameras(layout, v, seed * 1_000_003 + li, intrinsics, max_tries)
        except CameraSamplingError:
            continue
        for ci, cam in enumerate(cams):
            try:
                refs.append(project(layout, cam, (li, ci)))
            except DegenerateViewError:
                continue
    if not refs:
        raise NoReferenceError("no non-degenerate reference layout could be produced")
    return refs


def render_svg(ref: ReferenceLayout, detections: Iterable[Box2D] = ()) -> str:
    """Vector drawing of a reference layout, optionally over detection boxes."""
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]
    cats = sorted({b.category for b in ref.boxes})
    colour = {c: palette[i % len(palette)] for i, c in enumerate(cats)}
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{ref.width}" height="{ref.height}" '
        f'viewBox="0 0 {ref.width} {ref.height}">',
        f'<rect x="0" y="0" width="{ref.width}" height="{ref.height}" fill="white" stroke="black"/>',
    ]
    for b in detections:
        lines.append(
            f'<rect x="{b.x_min:.2f}" y="{b.y_min:.2f}" width="{b.x_max - b.x_min:.2f}" '
            f'height="{b.y_max - b.y_min:.2f}" fill="none" stroke="gray" stroke-dasharray="4 2"/>'
        )
    for b in ref.boxes:
        c = colour[b.category]
        lines.append(
            f'<rect x="{b.x_min:.2f}" y="{b.y_min:.2f}" width="{b.x_max - b.x_min:.2f}" '
            f'height="{b.y_max - b.y_min:.2f}" fill="none" stroke="{c}" stroke-width="2"/>'
        )
        lines.append(
            f'<text x="{b.x_min + 2:.2f}" y="{b.y_min + 12:.2f}" font-size="11" fill="{c}">'
            f'{b.category}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
