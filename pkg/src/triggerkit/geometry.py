"""2D primitives and contact queries for circles and convex polygons.

Bodies never rotate, so every query reduces to static shape-vs-shape
distance: each returns a contact normal (from the first shape to the
second) and a signed separation (negative when penetrating).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite Vec2 ({self.x}, {self.y})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def _dot(ax, ay, bx, by):
    return ax * bx + ay * by


def _norm(x, y):
    return math.sqrt(x * x + y * y)


@dataclass(frozen=True)
class Circle:
    radius: float


@dataclass(frozen=True)
class Polygon:
    """Convex polygon with counter-clockwise local vertices around (0, 0)."""

    vertices: tuple[tuple[float, float], ...]

    def world_vertices(self, cx: float, cy: float):
        return [(cx + vx, cy + vy) for vx, vy in self.vertices]

    def bounding_radius(self) -> float:
        return max(_norm(vx, vy) for vx, vy in self.vertices)


@dataclass(frozen=True)
class Contact:
    """Normal points from shape A towards shape B; separation < 0 means overlap."""

    normal: tuple[float, float]
    separation: float


def square(half: float) -> Polygon:
    return Polygon(((-half, -half), (half, -half), (half, half), (-half, half)))


def triangle(circumradius: float) -> Polygon:
    """Equilateral triangle, apex up, resting flat on its base."""
    r = circumradius
    return Polygon(
        (
            (-r * math.sqrt(3) / 2, -r / 2),
            (r * math.sqrt(3) / 2, -r / 2),
            (0.0, r),
        )
    )


def rect_polygon(x0: float, y0: float, x1: float, y1: float) -> tuple[Polygon, float, float]:
    """Axis-aligned rectangle as (polygon, center) from corner coordinates."""
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    hw, hh = abs(x1 - x0) / 2.0, abs(y1 - y0) / 2.0
    return Polygon(((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh))), cx, cy


def circle_circle(ax, ay, ra, bx, by, rb) -> Contact:
    dx, dy = bx - ax, by - ay
    d = _norm(dx, dy)
    if d > 1e-12:
        n = (dx / d, dy / d)
    else:
        n = (0.0, 1.0)
    return Contact(n, d - ra - rb)


def _closest_point_on_segment(px, py, ax, ay, bx, by):
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    t = 0.0 if denom <= 1e-18 else max(0.0, min(1.0, ((px - ax) * abx + (py - ay) * aby) / denom))
    return ax + t * abx, ay + t * aby


def _point_in_polygon(px, py, verts) -> bool:
    for i in range(len(verts)):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % len(verts)]
        if (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0) < 0.0:
            return False
    return True


def circle_polygon(cx, cy, r, poly: Polygon, px, py) -> Contact:
    """Contact from circle (first shape) to polygon (second shape)."""
    verts = poly.world_vertices(px, py)
    if _point_in_polygon(cx, cy, verts):
        # Deepest-axis escape: face with the largest (least negative) distance.
        best = None
        for i in range(len(verts)):
            x0, y0 = verts[i]
            x1, y1 = verts[(i + 1) % len(verts)]
            ex, ey = x1 - x0, y1 - y0
            ln = _norm(ex, ey)
            nx, ny = ey / ln, -ex / ln  # outward normal of CCW edge
            dist = _dot(cx - x0, cy - y0, nx, ny)
            if best is None or dist > best[0]:
                best = (dist, nx, ny)
        dist, nx, ny = best
        # Normal must point circle -> polygon, i.e. inward.
        return Contact((-nx, -ny), dist - r)
    best_d2, bx, by = None, 0.0, 0.0
    for i in range(len(verts)):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % len(verts)]
        qx, qy = _closest_point_on_segment(cx, cy, x0, y0, x1, y1)
        d2 = (qx - cx) ** 2 + (qy - cy) ** 2
        if best_d2 is None or d2 < best_d2:
            best_d2, bx, by = d2, qx, qy
    d = math.sqrt(best_d2)
    if d > 1e-12:
        n = ((bx - cx) / d, (by - cy) / d)
    else:
        n = (0.0, 1.0)
    return Contact(n, d - r)


def shape_contact(shape_a, ax, ay, shape_b, bx, by) -> Contact:
    """Contact between two shapes at given centers; normal points A -> B."""
    a_circle = isinstance(shape_a, Circle)
    b_circle = isinstance(shape_b, Circle)
    if a_circle and b_circle:
        return circle_circle(ax, ay, shape_a.radius, bx, by, shape_b.radius)
    if a_circle:
        return circle_polygon(ax, ay, shape_a.radius, shape_b, bx, by)
    if b_circle:
        c = circle_polygon(bx, by, shape_b.radius, shape_a, ax, ay)
        return Contact((-c.normal[0], -c.normal[1]), c.separation)
    return polygon_polygon(shape_a, ax, ay, shape_b, bx, by)


def _project(verts, nx, ny):
    lo = hi = _dot(verts[0][0], verts[0][1], nx, ny)
    for vx, vy in verts[1:]:
        p = _dot(vx, vy, nx, ny)
        lo, hi = min(lo, p), max(hi, p)
    return lo, hi


def polygon_polygon(pa: Polygon, ax, ay, pb: Polygon, bx, by) -> Contact:
    """Separating-axis test over both polygons' edge normals."""
    va = pa.world_vertices(ax, ay)
    vb = pb.world_vertices(bx, by)
    best_sep, best_n = None, (0.0, 1.0)
    for verts in (va, vb):
        for i in range(len(verts)):
            x0, y0 = verts[i]
            x1, y1 = verts[(i + 1) % len(verts)]
            ex, ey = x1 - x0, y1 - y0
            ln = _norm(ex, ey)
            if ln <= 1e-12:
                continue
            nx, ny = ey / ln, -ex / ln
            alo, ahi = _project(va, nx, ny)
            blo, bhi = _project(vb, nx, ny)
            if blo - ahi >= alo - bhi:
                sep, axis = blo - ahi, (nx, ny)
            else:
                sep, axis = alo - bhi, (-nx, -ny)
            if best_sep is None or sep > best_sep:
                best_sep, best_n = sep, axis
    return Contact(best_n, best_sep)
