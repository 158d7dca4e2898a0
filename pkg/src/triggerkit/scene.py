"""Scene construction: seeded layouts of static elements and dynamic objects.

A scene lives in a 256 x 256 world.  Twenty predefined layouts arrange
ramps, platforms, buttons and baskets between the three boundary elements
(ground, left wall, right wall); dynamic objects are rejection-sampled
into layout spawn zones.  All randomness flows through one SplitMix64
stream keyed by (layout_id, seed), so a scene is a pure function of its
arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .geometry import Circle, Polygon, Vec2, rect_polygon, shape_contact, square, triangle
from .rng import SplitMix64, derive_seed

WORLD_SIZE = 256.0
N_LAYOUTS = 20

SHAPES = ("cube", "triangle", "circle")
SIZES = ("small", "large")
N_COLORS = 8

ELEMENT_KINDS = ("ramp", "platform", "button", "basket", "left_wall", "right_wall", "ground")

# Dynamic objects use ids 1..n; static elements start here.
STATIC_ID_BASE = 1001

SIZE_PARAM = {"small": 6.0, "large": 10.0}
SIZE_MASS = {"small": 1.0, "large": 2.5}

MAX_PLACEMENT_ATTEMPTS = 1000
_PLACEMENT_MARGIN = 3.0


class UnplaceableSceneError(Exception):
    """Raised when rejection sampling cannot place an object or element."""


@dataclass(frozen=True)
class DynamicObjectSpec:
    object_id: int
    shape: str
    size: str
    color: int
    init_position: Vec2
    init_velocity: Vec2

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.size not in SIZES:
            raise ValueError(f"unknown size {self.size!r}")
        if not 0 <= self.color < N_COLORS:
            raise ValueError(f"color id {self.color} outside 0..{N_COLORS - 1}")

    @property
    def mass(self) -> float:
        return SIZE_MASS[self.size]

    def collision_shape(self):
        s = SIZE_PARAM[self.size]
        if self.shape == "circle":
            return Circle(s)
        if self.shape == "cube":
            return square(s)
        return triangle(1.2 * s)

    def bounding_radius(self) -> float:
        shp = self.collision_shape()
        return shp.radius if isinstance(shp, Circle) else shp.bounding_radius()


@dataclass(frozen=True)
class StaticElement:
    element_id: int
    kind: str
    # Convex parts as (polygon, center_x, center_y); a basket is three parts.
    parts: tuple[tuple[Polygon, float, float], ...]

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")


@dataclass(frozen=True)
class SceneSpec:
    layout_id: int
    seed: int
    dynamic_objects: tuple[DynamicObjectSpec, ...]
    static_elements: tuple[StaticElement, ...]
    world_size: float = WORLD_SIZE

    def dynamic_ids(self) -> list[int]:
        return [o.object_id for o in self.dynamic_objects]

    def static_ids(self) -> list[int]:
        return [e.element_id for e in self.static_elements]

    def object_by_id(self, object_id: int) -> DynamicObjectSpec:
        for o in self.dynamic_objects:
            if o.object_id == object_id:
                return o
        raise KeyError(f"no dynamic object with id {object_id}")

    def element_by_id(self, element_id: int) -> StaticElement:
        for e in self.static_elements:
            if e.element_id == element_id:
                return e
        raise KeyError(f"no static element with id {element_id}")


@dataclass(frozen=True)
class WorldConfig:
    gravity: float = 400.0
    restitution: float = 0.8          # dynamic vs dynamic
    restitution_static: float = 0.5   # dynamic vs static
    friction: float = 0.3
    dt: float = 1.0 / 60.0
    duration: float = 10.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.restitution <= 1.0 or not 0.0 <= self.restitution_static <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")
        if self.friction < 0:
            raise ValueError("friction must be non-negative")
        steps = self.duration / self.dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ValueError("duration must be a positive whole number of steps")

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.dt)


def is_dynamic_id(ident: int) -> bool:
    return 0 < ident < STATIC_ID_BASE


# --------------------------------------------------------------------------
# Layout blueprints


@dataclass
class _Blueprint:
    n_ramps: int
    n_platforms: int
    has_button: bool
    has_basket: bool
    ramp_left_first: bool
    n_dyn_range: tuple[int, int]
    rest_fraction: float


def _blueprint(layout_id: int) -> _Blueprint:
    lid = layout_id - 1
    return _Blueprint(
        n_ramps=1 + lid % 2,
        n_platforms=(lid // 2) % 3,
        has_button=lid % 3 == 0,
        has_basket=lid % 4 == 0,
        ramp_left_first=lid % 2 == 0,
        n_dyn_range=(0, 6) if layout_id == 1 else (4, 7),
        rest_fraction=0.55,
    )


_WALL = 8.0
_GROUND_TOP = 8.0


def _boundary_elements() -> list[StaticElement]:
    ground = rect_polygon(0.0, 0.0, WORLD_SIZE, _GROUND_TOP)
    left = rect_polygon(0.0, 0.0, _WALL, WORLD_SIZE)
    right = rect_polygon(WORLD_SIZE - _WALL, 0.0, WORLD_SIZE, WORLD_SIZE)
    return [
        StaticElement(STATIC_ID_BASE, "ground", (ground,)),
        StaticElement(STATIC_ID_BASE + 1, "left_wall", (left,)),
        StaticElement(STATIC_ID_BASE + 2, "right_wall", (right,)),
    ]


def _ramp_part(left_side: bool, rng: SplitMix64, narrow: bool = False):
    w = rng.uniform(55.0, 82.0) if narrow else rng.uniform(70.0, 115.0)
    h = rng.uniform(45.0, 75.0)
    if left_side:
        x0 = rng.uniform(_WALL, 20.0)
        verts = ((0.0, 0.0), (w, 0.0), (0.0, h))
        cx, cy = x0 + w / 3.0, _GROUND_TOP + h / 3.0
        local = tuple((x0 + vx - cx, _GROUND_TOP + vy - cy) for vx, vy in verts)
    else:
        x1 = WORLD_SIZE - rng.uniform(_WALL, 20.0)
        verts = ((0.0, 0.0), (0.0, h), (-w, 0.0))
        cx, cy = x1 - w / 3.0, _GROUND_TOP + h / 3.0
        local = tuple((x1 + vx - cx, _GROUND_TOP + vy - cy) for vx, vy in verts)
    return (Polygon(local), cx, cy)


def _flat_span(part) -> tuple[float, float, float]:
    """(x_min, x_max, y_top) of one axis-aligned rectangular part."""
    poly, cx, cy = part
    xs = [cx + vx for vx, _ in poly.vertices]
    ys = [cy + vy for _, vy in poly.vertices]
    return min(xs), max(xs), max(ys)


def _clearance_ok(part, boundary_parts, placed_parts) -> bool:
    # New elements may touch (but not penetrate) the ground and walls;
    # against each other they keep a clear gap.
    poly, cx, cy = part
    for other, ox, oy in boundary_parts:
        if shape_contact(poly, cx, cy, other, ox, oy).separation < -1e-6:
            return False
    for other, ox, oy in placed_parts:
        if shape_contact(poly, cx, cy, other, ox, oy).separation < 4.0:
            return False
    return True


def _build_statics(layout_id: int, rng: SplitMix64) -> list[StaticElement]:
    bp = _blueprint(layout_id)
    elements = _boundary_elements()
    boundary_parts = [p for e in elements for p in e.parts]
    placed_parts: list = []
    next_id = STATIC_ID_BASE + 3

    def _place(kind: str, make_parts) -> None:
        nonlocal next_id
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            parts = make_parts()
            if all(_clearance_ok(p, boundary_parts, placed_parts) for p in parts):
                elements.append(StaticElement(next_id, kind, tuple(parts)))
                placed_parts.extend(parts)
                next_id += 1
                return
        raise UnplaceableSceneError(f"cannot place {kind} in layout {layout_id}")

    # Wide ground-mounted elements go first so later small ones can still fit.
    left = bp.ramp_left_first
    for index in range(bp.n_ramps):
        side, narrow = left, index > 0
        _place("ramp", lambda s=side, n=narrow: [_ramp_part(s, rng, n)])
        left = not left

    if bp.has_basket:
        def _basket():
            cx = rng.uniform(50.0, WORLD_SIZE - 50.0)
            return [
                rect_polygon(cx - 24.0, _GROUND_TOP, cx + 24.0, _GROUND_TOP + 5.0),
                rect_polygon(cx - 24.0, _GROUND_TOP, cx - 18.0, _GROUND_TOP + 30.0),
                rect_polygon(cx + 18.0, _GROUND_TOP, cx + 24.0, _GROUND_TOP + 30.0),
            ]
        _place("basket", _basket)

    if bp.has_button:
        def _button():
            cx = rng.uniform(40.0, WORLD_SIZE - 40.0)
            return [rect_polygon(cx - 9.0, _GROUND_TOP, cx + 9.0, _GROUND_TOP + 6.0)]
        _place("button", _button)

    for _ in range(bp.n_platforms):
        def _platform():
            w = rng.uniform(50.0, 90.0)
            cx = rng.uniform(60.0, WORLD_SIZE - 60.0)
            cy = rng.uniform(70.0, 150.0)
            return [rect_polygon(cx - w / 2, cy - 4.0, cx + w / 2, cy + 4.0)]
        _place("platform", _platform)

    return elements


# --------------------------------------------------------------------------
# Dynamic object placement


def _overlaps_anything(obj: DynamicObjectSpec, placed: list[DynamicObjectSpec],
                       elements: list[StaticElement], static_margin: float) -> bool:
    shp = obj.collision_shape()
    x, y = obj.init_position.x, obj.init_position.y
    for other in placed:
        c = shape_contact(shp, x, y, other.collision_shape(),
                          other.init_position.x, other.init_position.y)
        if c.separation < _PLACEMENT_MARGIN:
            return True
    for element in elements:
        for poly, px, py in element.parts:
            if shape_contact(shp, x, y, poly, px, py).separation < static_margin:
                return True
    return False


def _support_spans(elements: list[StaticElement]) -> list[tuple[float, float, float]]:
    """Flat tops an object can rest on: free stretches of ground plus
    every platform (ramps, baskets and buttons shadow the ground below)."""
    free = [(_WALL + 14.0, WORLD_SIZE - _WALL - 14.0)]
    spans = []
    for e in elements:
        if e.kind == "platform":
            x0, x1, top = _flat_span(e.parts[0])
            if x1 - x0 > 24.0:
                spans.append((x0 + 10.0, x1 - 10.0, top))
        elif e.kind in ("ramp", "basket", "button"):
            for part in e.parts:
                x0, x1, _ = _flat_span(part)
                blocked = (x0 - 8.0, x1 + 8.0)
                free = [
                    piece
                    for lo, hi in free
                    for piece in ((lo, min(hi, blocked[0])), (max(lo, blocked[1]), hi))
                    if piece[1] - piece[0] > 24.0
                ]
    spans = [(lo, hi, _GROUND_TOP) for lo, hi in free] + spans
    return spans


def _sample_object(object_id: int, rng: SplitMix64, elements, placed,
                   rest_fraction: float) -> DynamicObjectSpec:
    shape = SHAPES[rng.randint(len(SHAPES))]
    size = SIZES[rng.randint(len(SIZES))]
    color = rng.randint(N_COLORS)
    rest = rng.random() < rest_fraction
    spans = _support_spans(elements)
    if not spans:
        rest = False
    for attempt in range(MAX_PLACEMENT_ATTEMPTS):
        if rest and attempt >= MAX_PLACEMENT_ATTEMPTS // 2:
            rest = False  # crowded supports: finish the budget airborne
        if rest:
            # Rest exactly on a flat support: touching counts as placed,
            # only true penetration is rejected.
            x0, x1, top = spans[rng.randint(len(spans))]
            x = rng.uniform(x0, x1)
            shp_low = {"circle": SIZE_PARAM[size], "cube": SIZE_PARAM[size],
                       "triangle": 1.2 * SIZE_PARAM[size] / 2.0}[shape]
            pos = Vec2(x, top + shp_low)
            vel = Vec2(0.0, 0.0)
            static_margin = -1e-9
        else:
            pos = Vec2(rng.uniform(30.0, WORLD_SIZE - 30.0), rng.uniform(150.0, 225.0))
            vx = rng.uniform(20.0, 120.0) * (1.0 if rng.random() < 0.5 else -1.0)
            vel = Vec2(vx, rng.uniform(-60.0, 30.0))
            static_margin = _PLACEMENT_MARGIN
        candidate = DynamicObjectSpec(object_id, shape, size, color, pos, vel)
        r = candidate.bounding_radius()
        if not (_WALL + r < pos.x < WORLD_SIZE - _WALL - r and _GROUND_TOP <= pos.y < WORLD_SIZE - r - 2.0):
            continue
        if not _overlaps_anything(candidate, placed, elements, static_margin):
            return candidate
    raise UnplaceableSceneError(f"cannot place dynamic object {object_id}")


def build_scene(layout_id: int, seed: int) -> SceneSpec:
    """Deterministic scene for (layout_id, seed).

    Raises UnplaceableSceneError when rejection sampling exhausts its
    attempt budget; callers retry with another seed.
    """
    if not 1 <= layout_id <= N_LAYOUTS:
        raise ValueError(f"layout_id must be in 1..{N_LAYOUTS}, got {layout_id}")
    rng = SplitMix64(derive_seed(seed, layout_id))
    elements = _build_statics(layout_id, rng)
    bp = _blueprint(layout_id)
    lo, hi = bp.n_dyn_range
    n_dyn = lo + rng.randint(hi - lo + 1)
    objects: list[DynamicObjectSpec] = []
    for object_id in range(1, n_dyn + 1):
        objects.append(_sample_object(object_id, rng, elements, objects, bp.rest_fraction))
    return SceneSpec(layout_id, seed, tuple(objects), tuple(elements))


def remove_object(scene: SceneSpec, object_id: int) -> SceneSpec:
    """Scene with one dynamic object removed; everything else verbatim."""
    if not is_dynamic_id(object_id):
        raise ValueError(f"id {object_id} is not a dynamic object id")
    if object_id not in scene.dynamic_ids():
        raise KeyError(f"no dynamic object with id {object_id}")
    remaining = tuple(o for o in scene.dynamic_objects if o.object_id != object_id)
    return replace(scene, dynamic_objects=remaining)
