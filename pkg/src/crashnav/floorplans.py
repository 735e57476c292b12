"""Hand-authored floorplans: six desk-scale indoor test environments.

Each is a closed 2D arrangement of wall/glass/furniture segments with one or
more spawn rectangles. Glass shows up where the scenario calls for
depth-confusing surfaces (corner doors, meeting-room partitions, entrance
walls); furniture blocks model chairs and tables.
"""

from __future__ import annotations

from .world import (
    FloorPlan,
    Segment,
    furniture,
    glass,
    validate_floorplan,
    wall,
)

FLAT, BRICK, STRIPE, NOISE, DOOR, GRAIN = range(6)


def _poly(points, material) -> list[Segment]:
    return [Segment(tuple(points[i]), tuple(points[i + 1]), material) for i in range(len(points) - 1)]


def _seg(a, b, material) -> Segment:
    return Segment(tuple(a), tuple(b), material)


def _block(cx, cy, w, h, tex=GRAIN) -> list[Segment]:
    """Closed furniture rectangle centered at (cx, cy)."""
    x0, y0, x1, y1 = cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2
    pts = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
    return _poly(pts, furniture(tex))


def glass_door() -> FloorPlan:
    """L-corridor whose straight continuation is blocked by glass doors."""
    segs = []
    segs += [_seg((0, 0), (12, 0), wall(BRICK))]          # south wall, west arm
    segs += [_seg((0, 0), (0, 2.5), wall(DOOR))]          # west dead end
    segs += [_seg((0, 2.5), (9.5, 2.5), wall(STRIPE))]    # north wall, west arm
    segs += [_seg((9.5, 2.5), (9.5, 9), wall(BRICK))]     # branch west wall
    segs += [_seg((9.5, 9), (12, 9), wall(DOOR))]         # branch dead end
    segs += [_seg((12, 9), (12, 2.5), wall(STRIPE))]      # branch east wall
    # glass double door across the corridor's straight continuation; the room
    # behind it runs deeper than the side branch, so it reads as the way out
    segs += [_seg((12, 2.5), (12, 1.25), glass())]
    segs += [_seg((12, 1.25), (12, 0), glass())]
    segs += _poly([(12, 0), (22, 0), (22, 2.5), (12, 2.5)], wall(NOISE))
    plan = FloorPlan("glass_door", segs, [(2.0, 0.6, 6.0, 1.9)])
    return plan


def hallway() -> FloorPlan:
    """Narrow (2 m) dead-end straight corridor, 40 m long, flat side walls."""
    segs = [
        _seg((0, 0), (40, 0), wall(FLAT)),
        _seg((40, 0), (40, 2), wall(BRICK)),
        _seg((40, 2), (0, 2), wall(FLAT)),
        _seg((0, 2), (0, 0), wall(BRICK)),
    ]
    return FloorPlan("hallway", segs, [(17.0, 0.55, 23.0, 1.45)])


def hallway_chairs() -> FloorPlan:
    """The hallway plan plus chairs; some wall gaps are below 1 m."""
    plan = hallway()
    segs = list(plan.segments)
    # (x, y0, y1): chairs alternate sides; gap to the far wall annotated
    chairs = [
        (8.0, 0.03, 1.05),    # gap 0.95 m
        (14.0, 1.10, 1.97),   # gap 1.10 m
        (20.5, 0.03, 0.85),   # gap 1.15 m
        (26.0, 1.07, 1.97),   # gap 1.07 m
        (32.0, 0.03, 0.95),   # gap 1.05 m
    ]
    for x, y0, y1 in chairs:
        pts = [(x - 0.22, y0), (x + 0.22, y0), (x + 0.22, y1), (x - 0.22, y1), (x - 0.22, y0)]
        segs += _poly(pts, furniture(GRAIN))
    return FloorPlan("hallway_chairs", segs, [(16.0, 0.55, 19.0, 1.45)])


def wean() -> FloorPlan:
    """Straight stretches joined at 90 degrees; a glass alcove at the first corner."""
    segs = []
    segs += [_seg((0, 0), (12, 0), wall(STRIPE))]       # arm 1 south
    # east end of arm 1: glass doors with a deep alcove behind
    segs += [_seg((12, 0), (12, 1.25), glass()), _seg((12, 1.25), (12, 2.5), glass())]
    segs += _poly([(12, 0), (17, 0), (17, 2.5), (12, 2.5)], wall(NOISE))  # alcove shell
    segs += [_seg((12, 2.5), (12, 12), wall(BRICK))]    # arm 2 east
    segs += [_seg((12, 12), (-4, 12), wall(FLAT))]      # arm 3 north
    segs += [_seg((-4, 12), (-4, 9.5), wall(DOOR))]     # arm 3 dead end
    segs += [_seg((-4, 9.5), (9.5, 9.5), wall(BRICK))]  # arm 3 south
    segs += [_seg((9.5, 9.5), (9.5, 2.5), wall(STRIPE))]  # arm 2 west
    segs += [_seg((9.5, 2.5), (0, 2.5), wall(NOISE))]   # arm 1 north
    segs += [_seg((0, 2.5), (0, 0), wall(DOOR))]        # arm 1 dead end
    return FloorPlan("wean", segs, [(3.0, 0.7, 7.0, 1.8)])


def office_floor() -> FloorPlan:
    """Ring of narrow corridors around an inner office block with a glass-walled room."""
    segs = []
    segs += _poly([(0, 0), (20, 0), (20, 14), (0, 14), (0, 0)], wall(BRICK))  # outer shell
    # inner block; its east face is partly a glass meeting-room wall
    segs += [_seg((3.5, 3.5), (16.5, 3.5), wall(STRIPE))]
    segs += [_seg((16.5, 3.5), (16.5, 5.0), wall(NOISE))]
    segs += [_seg((16.5, 5.0), (16.5, 7.0), glass()), _seg((16.5, 7.0), (16.5, 9.0), glass())]
    segs += [_seg((16.5, 9.0), (16.5, 10.5), wall(NOISE))]
    segs += _poly([(16.5, 10.5), (3.5, 10.5), (3.5, 3.5)], wall(FLAT))
    # the meeting room behind the glass, closed off from the block interior
    segs += _poly([(16.5, 5.0), (10.5, 5.0), (10.5, 9.0), (16.5, 9.0)], wall(GRAIN))
    return FloorPlan(
        "office_floor",
        segs,
        [(6.0, 0.9, 8.5, 2.6), (6.0, 11.4, 8.5, 13.1)],
    )


def entrance_atrium() -> FloorPlan:
    """Vestibule with a glass wall facing the atrium; the real doorway is offset."""
    segs = []
    segs += [_seg((0, 0), (6, 0), wall(STRIPE))]   # vestibule south
    segs += [_seg((0, 0), (0, 6), wall(BRICK))]    # vestibule west
    segs += [_seg((0, 6), (6, 6), wall(NOISE))]    # vestibule north
    # east wall: glass panels with a 2.5 m doorway at the north end
    segs += [
        _seg((6, 0), (6, 1.75), glass()),
        _seg((6, 1.75), (6, 3.5), glass()),
    ]
    # atrium shell; the doorway is the open gap at (6, 3.5)-(6, 6)
    segs += [_seg((6, -2), (6, 0), wall(DOOR))]
    segs += [_seg((6, 6), (6, 8), wall(DOOR))]
    segs += _poly([(6, -2), (20, -2), (20, 8), (6, 8)], wall(BRICK))
    # reception partition just behind the glazed section, so the glass fronts
    # a shallow service strip while the doorway leads into the open atrium
    segs += [_seg((8.2, -2), (8.2, 3.5), wall(NOISE))]
    # cluttered tables
    for cx, cy in [(10.5, 0.0), (10.5, 4.8), (13.0, -0.8), (13.5, 6.3), (15.5, 2.5), (15.0, 7.3), (18.0, 5.5), (17.5, -0.5)]:
        segs += _block(cx, cy, 1.1, 1.1)
    return FloorPlan("entrance_atrium", segs, [(1.0, 2.0, 3.2, 4.2)])


SHIPPED_PLANS = {
    "glass_door": glass_door,
    "office_floor": office_floor,
    "entrance_atrium": entrance_atrium,
    "wean": wean,
    "hallway": hallway,
    "hallway_chairs": hallway_chairs,
}


def load_plan(name: str) -> FloorPlan:
    """Build and validate a shipped plan by name."""
    if name not in SHIPPED_PLANS:
        raise KeyError(f"unknown floorplan {name!r}; shipped: {sorted(SHIPPED_PLANS)}")
    plan = SHIPPED_PLANS[name]()
    validate_floorplan(plan)
    return plan
