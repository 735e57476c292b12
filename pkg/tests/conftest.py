import math

import numpy as np
import pytest

from crashnav.world import FloorPlan, Pose, Segment, glass, wall


def make_box(x0, y0, x1, y1, material=None):
    m = material or wall()
    return [
        Segment((x0, y0), (x1, y0), m),
        Segment((x1, y0), (x1, y1), m),
        Segment((x1, y1), (x0, y1), m),
        Segment((x0, y1), (x0, y0), m),
    ]


def unit_square_plan(spawn=(0.3, 0.3, 0.7, 0.7), name="unit_square", size=1.0):
    return FloorPlan(name=name, segments=make_box(0, 0, size, size),
                     spawn_regions=[spawn])


def random_plan(rng, max_interior=16, size=20.0, with_glass=False):
    """Closed square room with random interior segments; for geometry tests
    only (spawn regions may be cramped, so skip plan-level validation)."""
    segments = make_box(0.0, 0.0, size, size)
    n = int(rng.integers(0, max_interior + 1))
    for _ in range(n):
        a = rng.uniform(0.5, size - 0.5, 2)
        direction = rng.uniform(-math.pi, math.pi)
        length = rng.uniform(0.3, size / 2)
        b = a + length * np.array([math.cos(direction), math.sin(direction)])
        b = np.clip(b, 0.0, size)
        if np.hypot(*(b - a)) < 1e-3:
            continue
        mat = glass() if (with_glass and rng.random() < 0.3) else wall(int(rng.integers(0, 4)))
        segments.append(Segment((a[0], a[1]), (b[0], b[1]), mat))
    return FloorPlan(name="random", segments=segments,
                     spawn_regions=[(size / 2 - 1, size / 2 - 1,
                                     size / 2 + 1, size / 2 + 1)])


def random_free_pose(rng, plan, size=20.0, clearance=0.05):
    """A pose strictly inside the room and off every segment."""
    from oracles import _point_segment_distance

    while True:
        x = rng.uniform(0.2, size - 0.2)
        y = rng.uniform(0.2, size - 0.2)
        ok = all(
            _point_segment_distance(x, y, s.a[0], s.a[1], s.b[0], s.b[1]) > clearance
            for s in plan.segments
        )
        if ok:
            return Pose(x, y, rng.uniform(-math.pi, math.pi))


@pytest.fixture
def square_plan():
    return unit_square_plan()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
