"""Floorplan geometry, raycasting, first-person rendering and collision queries.

Conventions used throughout the package:
  * world frame: x right, y up, units in meters
  * heading in radians, counter-clockwise positive, normalized to [-pi, pi)
  * image column 0 is the LEFTMOST column; the ray for column c points at
    heading + fov/2 - (c + 0.5) * fov / n_rays
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

FLOORPLAN_FORMAT_VERSION = 1

# Hull-inclusive drone radius (AR-Drone class); shared with the vehicle model.
DRONE_RADIUS = 0.25

# Rendering constants: wall height and camera mounted at mid-height.
WALL_HEIGHT = 2.5
GLASS_TINT = 0.06
GLASS_EDGE_FRACTION = 0.02  # of panel length, each end
GLASS_EDGE_HIGHLIGHT = 0.20  # frame/edge brightness boost at panel borders
SHADE_RATE = 0.15  # distance shading: 1 / (1 + SHADE_RATE * d)
SHADE_FLOOR = 0.18

_EPS = 1e-12
_RAY_MIN_T = 1e-9


class FloorPlanError(ValueError):
    pass


class PlanParseError(FloorPlanError):
    pass


class PlanValidationError(FloorPlanError):
    pass


class MaterialKind(enum.Enum):
    WALL = "wall"
    GLASS = "glass"
    FURNITURE = "furniture"


@dataclass(frozen=True)
class Material:
    kind: MaterialKind
    texture_id: int
    depth_transparent: bool

    def __post_init__(self):
        if (self.kind is MaterialKind.GLASS) != self.depth_transparent:
            raise PlanValidationError(
                f"depth_transparent must be true exactly for glass, got {self}"
            )
        if not (0 <= self.texture_id < N_TEXTURES):
            raise PlanValidationError(f"texture_id {self.texture_id} out of range")


def wall(texture_id: int = 0) -> Material:
    return Material(MaterialKind.WALL, texture_id, False)


def glass() -> Material:
    return Material(MaterialKind.GLASS, 0, True)


def furniture(texture_id: int = 5) -> Material:
    return Material(MaterialKind.FURNITURE, texture_id, False)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


def wrap_angle(a: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class Segment:
    a: tuple[float, float]
    b: tuple[float, float]
    material: Material

    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])


@dataclass
class FloorPlan:
    name: str
    segments: list[Segment]
    spawn_regions: list[tuple[float, float, float, float]]

    # geometry arrays, built once for vectorized queries
    _ax: np.ndarray = field(init=False, repr=False)
    _ay: np.ndarray = field(init=False, repr=False)
    _ex: np.ndarray = field(init=False, repr=False)
    _ey: np.ndarray = field(init=False, repr=False)
    _len: np.ndarray = field(init=False, repr=False)
    _opaque: np.ndarray = field(init=False, repr=False)
    _tex: np.ndarray = field(init=False, repr=False)
    _glass: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.segments:
            raise PlanValidationError("floorplan has no segments")
        a = np.array([s.a for s in self.segments], dtype=np.float64)
        b = np.array([s.b for s in self.segments], dtype=np.float64)
        e = b - a
        self._ax, self._ay = a[:, 0].copy(), a[:, 1].copy()
        self._ex, self._ey = e[:, 0].copy(), e[:, 1].copy()
        self._len = np.hypot(self._ex, self._ey)
        if np.any(self._len < 1e-9):
            idx = int(np.argmin(self._len))
            raise PlanValidationError(f"segment {idx} has zero length")
        self._opaque = np.array(
            [not s.material.depth_transparent for s in self.segments], dtype=bool
        )
        self._glass = ~self._opaque
        self._tex = np.array([s.material.texture_id for s in self.segments], dtype=np.int64)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def segment_arrays(self):
        return self._ax, self._ay, self._ex, self._ey


@dataclass(frozen=True)
class DepthScan:
    n_rays: int
    fov: float
    depths: np.ndarray                # nearest surface of any material
    first_opaque_depths: np.ndarray   # nearest non-transparent surface
    hit_materials: tuple              # Material or None (sentinel: no hit in range)
    hit_segments: np.ndarray          # segment index, -1 for no hit
    hit_u: np.ndarray                 # param in [0,1] along the hit segment
    opaque_segments: np.ndarray
    opaque_u: np.ndarray


@dataclass(frozen=True)
class Frame:
    width: int
    height: int
    pixels: np.ndarray  # float64 in [0,1], shape (height, width), quantized to 1/255

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width):
            raise ValueError("pixel buffer shape mismatch")

    def to_u8(self) -> np.ndarray:
        return np.round(self.pixels * 255.0).astype(np.uint8)

    @staticmethod
    def from_u8(buf: np.ndarray) -> "Frame":
        h, w = buf.shape
        return Frame(w, h, buf.astype(np.float64) / 255.0)


@dataclass(frozen=True)
class Camera:
    fov: float = math.radians(92.0)
    width: int = 64
    height: int = 64


@dataclass(frozen=True)
class Contact:
    normal: tuple[float, float]
    segment_index: int
    distance: float


# ---------------------------------------------------------------------------
# Texture table: 6 procedural textures, deterministic in the surface
# coordinate (u along the segment, v up the wall, both in meters).
# ---------------------------------------------------------------------------

N_TEXTURES = 6
TEXTURE_NAMES = ("flat", "brick", "stripe", "noise", "door_panel", "furniture_grain")


def _hash01(ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    h = (ix.astype(np.int64) * 73856093) ^ (iy.astype(np.int64) * 19349663)
    h = (h ^ (h >> 13)) * 1274126177
    return ((h ^ (h >> 16)) & 0xFFFF) / 65535.0


def texture_intensity(texture_id: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Base surface intensity in [0,1] for each (texture, u, v) triple."""
    out = np.full(np.broadcast(texture_id, u, v).shape, 0.55)
    tid = np.broadcast_to(texture_id, out.shape)
    u = np.broadcast_to(u, out.shape)
    v = np.broadcast_to(v, out.shape)

    m = tid == 1  # brick: 0.25 m courses, 0.5 m bricks, dark mortar lines
    if m.any():
        row = np.floor(v[m] / 0.25)
        un = u[m] + 0.25 * (row % 2)
        mortar = (np.abs(v[m] / 0.25 - np.round(v[m] / 0.25)) < 0.07) | (
            np.abs(un / 0.5 - np.round(un / 0.5)) < 0.035
        )
        out[m] = np.where(mortar, 0.30, 0.58 + 0.06 * _hash01(np.floor(un / 0.5), row))
    m = tid == 2  # stripe: 0.5 m vertical bands
    if m.any():
        out[m] = np.where(np.floor(u[m] / 0.5) % 2 == 0, 0.35, 0.70)
    m = tid == 3  # noise: 10 cm hashed cells
    if m.any():
        out[m] = 0.30 + 0.45 * _hash01(np.floor(u[m] / 0.1), np.floor(v[m] / 0.1))
    m = tid == 4  # door panel: 1 m cells with dark borders, lighter center
    if m.any():
        cu = u[m] / 1.0 - np.floor(u[m] / 1.0)
        border = (cu < 0.06) | (cu > 0.94) | (v[m] < 0.1) | (v[m] > WALL_HEIGHT - 0.3)
        out[m] = np.where(border, 0.25, 0.62)
    m = tid == 5  # furniture grain: fine sinusoidal grain
    if m.any():
        out[m] = 0.45 + 0.14 * np.sin(12.0 * u[m] + 3.0 * np.sin(4.0 * v[m]))
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Floorplan document round trip
# ---------------------------------------------------------------------------

_MATERIAL_TAGS = {k.value: k for k in MaterialKind}


def floorplan_to_text(plan: FloorPlan) -> str:
    doc = {
        "format_version": FLOORPLAN_FORMAT_VERSION,
        "name": plan.name,
        "segments": [
            {
                "a": list(s.a),
                "b": list(s.b),
                "material": s.material.kind.value,
                "texture_id": s.material.texture_id,
            }
            for s in plan.segments
        ],
        "spawn_regions": [list(r) for r in plan.spawn_regions],
    }
    return json.dumps(doc, indent=2)


def load_floorplan(text: str, drone_radius: float = DRONE_RADIUS) -> FloorPlan:
    """Parse and validate a floorplan document (JSON text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise PlanParseError(f"malformed floorplan document: {e}") from e
    if not isinstance(doc, dict):
        raise PlanParseError("floorplan document must be a JSON object")
    version = doc.get("format_version")
    if version != FLOORPLAN_FORMAT_VERSION:
        raise PlanParseError(f"unsupported format_version {version!r}")
    try:
        segments = []
        for s in doc["segments"]:
            kind = _MATERIAL_TAGS[s["material"]]
            mat = Material(kind, int(s.get("texture_id", 0)), kind is MaterialKind.GLASS)
            segments.append(Segment(tuple(map(float, s["a"])), tuple(map(float, s["b"])), mat))
        spawn = [tuple(map(float, r)) for r in doc["spawn_regions"]]
        name = str(doc["name"])
    except (KeyError, TypeError, ValueError) as e:
        raise PlanParseError(f"bad floorplan field: {e}") from e
    plan = FloorPlan(name, segments, spawn)
    validate_floorplan(plan, drone_radius)
    return plan


def load_floorplan_file(path, drone_radius: float = DRONE_RADIUS) -> FloorPlan:
    with open(path, "r", encoding="utf-8") as f:
        return load_floorplan(f.read(), drone_radius)


def _segment_rect_distance(a, b, rect) -> float:
    """Distance between segment ab and an axis-aligned rectangle (0 if touching)."""
    x0, y0, x1, y1 = rect
    ax, ay = a
    bx, by = b
    inside = lambda p: x0 <= p[0] <= x1 and y0 <= p[1] <= y1
    if inside(a) or inside(b):
        return 0.0
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    edges = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    best = math.inf
    for p, q in edges:
        best = min(best, _segment_segment_distance(a, b, p, q))
        if best == 0.0:
            return 0.0
    return best


def _segment_segment_distance(a, b, p, q) -> float:
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    d1, d2 = cross(p, q, a), cross(p, q, b)
    d3, d4 = cross(a, b, p), cross(a, b, q)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return 0.0
    return min(
        _point_segment_distance(a, p, q),
        _point_segment_distance(b, p, q),
        _point_segment_distance(p, a, b),
        _point_segment_distance(q, a, b),
    )


def _point_segment_distance(pt, a, b) -> float:
    ex, ey = b[0] - a[0], b[1] - a[1]
    L2 = ex * ex + ey * ey
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((pt[0] - a[0]) * ex + (pt[1] - a[1]) * ey) / L2))
    cx, cy = a[0] + t * ex, a[1] + t * ey
    return math.hypot(pt[0] - cx, pt[1] - cy)


def validate_floorplan(plan: FloorPlan, drone_radius: float = DRONE_RADIUS) -> None:
    """Raise PlanValidationError unless all floorplan invariants hold."""
    for i, s in enumerate(plan.segments):
        if s.length() < 1e-9:
            raise PlanValidationError(f"segment {i} has zero length")
    if not plan.spawn_regions:
        raise PlanValidationError("floorplan needs at least one spawn region")
    for r in plan.spawn_regions:
        x0, y0, x1, y1 = r
        if not (x0 < x1 and y0 < y1):
            raise PlanValidationError(f"degenerate spawn region {r}")
        for i, s in enumerate(plan.segments):
            if _segment_rect_distance(s.a, s.b, r) < drone_radius:
                raise PlanValidationError(
                    f"segment {i} intrudes into spawn region {r} inflated by {drone_radius}"
                )
    # ray-escape test: a closed boundary means no ray from a spawn center misses
    for r in plan.spawn_regions:
        cx, cy = (r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0
        scan = raycast(plan, Pose(cx, cy, 0.0), 2.0 * math.pi - 1e-9, 360, 1e6)
        if np.any(scan.hit_segments < 0):
            raise PlanValidationError(
                f"open boundary: ray escapes from spawn center ({cx}, {cy})"
            )


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def ray_angles(heading: float, fov: float, n_rays: int) -> np.ndarray:
    """Ray directions, column 0 leftmost."""
    offsets = fov / 2.0 - (np.arange(n_rays) + 0.5) * fov / n_rays
    return heading + offsets


def _intersect(plan: FloorPlan, px: float, py: float, angles: np.ndarray, mask: np.ndarray):
    """Per-ray nearest intersection among segments selected by `mask`.

    Returns (t, seg_index, u); t = inf and seg_index = -1 for misses.
    """
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    ax, ay, ex, ey = plan.segment_arrays()
    rx = ax[None, :] - px
    ry = ay[None, :] - py
    denom = dx * ey[None, :] - dy * ex[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rx * ey[None, :] - ry * ex[None, :]) / denom
        u = (rx * dy - ry * dx) / denom
    valid = (np.abs(denom) > _EPS) & (t >= _RAY_MIN_T) & (u >= 0.0) & (u <= 1.0)
    valid &= mask[None, :]
    t = np.where(valid, t, np.inf)
    idx = np.argmin(t, axis=1)
    best_t = t[np.arange(t.shape[0]), idx]
    best_u = u[np.arange(t.shape[0]), idx]
    seg = np.where(np.isfinite(best_t), idx, -1)
    return best_t, seg, best_u


def raycast(plan: FloorPlan, pose: Pose, fov: float, n_rays: int, max_range: float) -> DepthScan:
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    if not (0.0 < fov <= 2.0 * math.pi):
        raise ValueError("fov must be in (0, 2*pi]")
    angles = ray_angles(pose.heading, fov, n_rays)
    all_mask = np.ones(plan.n_segments, dtype=bool)
    t, seg, u = _intersect(plan, pose.x, pose.y, angles, all_mask)
    t_op, seg_op, u_op = _intersect(plan, pose.x, pose.y, angles, plan._opaque)

    in_range = np.isfinite(t) & (t <= max_range)
    depths = np.where(in_range, t, max_range)
    seg = np.where(in_range, seg, -1)
    in_range_op = np.isfinite(t_op) & (t_op <= max_range)
    opaque_depths = np.where(in_range_op, t_op, max_range)
    seg_op = np.where(in_range_op, seg_op, -1)

    materials = tuple(
        plan.segments[s].material if s >= 0 else None for s in seg
    )
    return DepthScan(
        n_rays=n_rays,
        fov=fov,
        depths=depths,
        first_opaque_depths=opaque_depths,
        hit_materials=materials,
        hit_segments=seg,
        hit_u=np.where(seg >= 0, u, 0.0),
        opaque_segments=seg_op,
        opaque_u=np.where(seg_op >= 0, u_op, 0.0),
    )


RENDER_MAX_RANGE = 200.0


def render(plan: FloorPlan, pose: Pose, camera: Camera) -> Frame:
    """Column-based perspective render; pure function of its arguments."""
    if camera.width < 8 or camera.height < 8:
        raise ValueError("camera dimensions must be at least 8x8")
    w, h = camera.width, camera.height
    scan = raycast(plan, pose, camera.fov, w, RENDER_MAX_RANGE)
    offsets = ray_angles(0.0, camera.fov, w)
    cos_off = np.cos(offsets)
    tan_vhalf = math.tan(camera.fov / 2.0) * h / w

    px = np.zeros((h, w))
    half = h / 2.0
    rows = np.arange(h) + 0.5

    # geometry comes from the first OPAQUE surface (glass is see-through)
    t_op = scan.first_opaque_depths
    perp = np.maximum(t_op * cos_off, 1e-6)
    hh = (WALL_HEIGHT / 2.0) / perp * (half / tan_vhalf)  # projected half-height, px
    seg_op = scan.opaque_segments

    y0 = half - hh
    y1 = half + hh

    # ceiling / floor gradients (fixed, distance-agnostic)
    above = rows[:, None] < y0[None, :]
    below = rows[:, None] >= y1[None, :]
    s_up = rows[:, None] / half
    px = np.where(above, 0.30 + 0.12 * s_up, px)
    s_dn = (rows[:, None] - half) / half
    px = np.where(below, 0.25 + 0.30 * s_dn, px)

    wall_mask = ~(above | below) & (seg_op >= 0)[None, :]
    if wall_mask.any():
        # v: meters up the wall for each pixel in the wall band
        with np.errstate(divide="ignore", invalid="ignore"):
            vfrac = (y1[None, :] - rows[:, None]) / (2.0 * hh[None, :])
        v_m = np.clip(vfrac, 0.0, 1.0) * WALL_HEIGHT
        seg_safe = np.maximum(seg_op, 0)
        u_m = scan.opaque_u * plan._len[seg_safe]
        tex = plan._tex[seg_safe]
        base = texture_intensity(tex[None, :], u_m[None, :], v_m)
        shade = np.maximum(1.0 / (1.0 + SHADE_RATE * t_op), SHADE_FLOOR)
        px = np.where(wall_mask, base * shade[None, :], px)
    # no-hit columns in the wall band render as a dark horizon
    void_mask = ~(above | below) & (seg_op < 0)[None, :]
    px = np.where(void_mask, SHADE_FLOOR, px)

    # glass: nearest surface transparent -> tint the glass's own extent
    is_glass = np.array(
        [m is not None and m.depth_transparent for m in scan.hit_materials]
    )
    if is_glass.any():
        t_g = scan.depths
        perp_g = np.maximum(t_g * cos_off, 1e-6)
        hh_g = (WALL_HEIGHT / 2.0) / perp_g * (half / tan_vhalf)
        g0 = half - hh_g
        g1 = half + hh_g
        in_g = (rows[:, None] >= g0[None, :]) & (rows[:, None] < g1[None, :])
        in_g &= is_glass[None, :]
        px = px + GLASS_TINT * in_g
        seg_g = np.maximum(scan.hit_segments, 0)
        u_g = scan.hit_u * plan._len[seg_g]
        panel_len = plan._len[seg_g]
        edge = (scan.hit_u < GLASS_EDGE_FRACTION) | (scan.hit_u > 1.0 - GLASS_EDGE_FRACTION)
        edge &= is_glass
        px = px + GLASS_EDGE_HIGHLIGHT * (in_g & edge[None, :])

    px = np.clip(px, 0.0, 1.0)
    px = np.round(px * 255.0) / 255.0  # quantize so archives are lossless
    return Frame(w, h, px)


def collision_check(plan: FloorPlan, pose: Pose, radius: float):
    """Nearest contact within `radius`, or None. Ties break to lowest index."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    ax, ay, ex, ey = plan.segment_arrays()
    apx = pose.x - ax
    apy = pose.y - ay
    L2 = ex * ex + ey * ey
    t = np.clip((apx * ex + apy * ey) / L2, 0.0, 1.0)
    cx = ax + t * ex
    cy = ay + t * ey
    dist = np.hypot(pose.x - cx, pose.y - cy)
    hits = dist < radius
    if not hits.any():
        return None
    masked = np.where(hits, dist, np.inf)
    idx = int(np.argmin(masked))  # argmin returns the first (lowest-index) minimum
    d = float(dist[idx])
    if d > 1e-12:
        n = ((pose.x - cx[idx]) / d, (pose.y - cy[idx]) / d)
    else:
        # center exactly on the segment: use its left normal
        L = math.hypot(ex[idx], ey[idx])
        n = (-ey[idx] / L, ex[idx] / L)
    return Contact(normal=n, segment_index=idx, distance=d)
