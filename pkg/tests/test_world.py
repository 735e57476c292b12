import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_box, random_free_pose, random_plan, unit_square_plan
from oracles import brute_force_contact, march_depths, plan_to_seg_array

from crashnav.world import (
    Camera,
    FloorPlan,
    Frame,
    Pose,
    PlanParseError,
    PlanValidationError,
    Segment,
    collision_check,
    floorplan_to_text,
    glass,
    load_floorplan,
    raycast,
    render,
    texture_intensity,
    wall,
)


# ---------------------------------------------------------------------------
# floorplan documents
# ---------------------------------------------------------------------------

def test_unit_square_document_loads(square_plan):
    text = floorplan_to_text(square_plan)
    plan = load_floorplan(text)
    assert plan.name == square_plan.name
    assert len(plan.segments) == 4
    assert plan.spawn_regions == square_plan.spawn_regions


def test_open_boundary_rejected():
    plan = unit_square_plan()
    doc = json.loads(floorplan_to_text(plan))
    del doc["segments"][2]  # hole in the square: a ray can escape
    with pytest.raises(PlanValidationError, match="escapes|open"):
        load_floorplan(json.dumps(doc))


def test_zero_length_segment_rejected():
    plan = unit_square_plan()
    doc = json.loads(floorplan_to_text(plan))
    doc["segments"].append({"a": [0.5, 0.5], "b": [0.5, 0.5],
                            "material": "wall", "texture_id": 0})
    with pytest.raises(PlanValidationError):
        load_floorplan(json.dumps(doc))


def test_spawn_touching_geometry_rejected():
    plan = FloorPlan(name="tight", segments=make_box(0, 0, 1, 1),
                     spawn_regions=[(0.01, 0.01, 0.99, 0.99)])
    with pytest.raises(PlanValidationError):
        load_floorplan(floorplan_to_text(plan))


def test_malformed_document_is_parse_error():
    with pytest.raises(PlanParseError):
        load_floorplan("not json at all {")


def test_corridor_plan_dimensions():
    from crashnav.floorplans import load_plan
    plan = load_plan("hallway")
    ys = [p for s in plan.segments for p in (s.a[1], s.b[1])]
    xs = [p for s in plan.segments for p in (s.a[0], s.b[0])]
    assert max(ys) - min(ys) == pytest.approx(2.0)
    assert max(xs) - min(xs) == pytest.approx(40.0)


# ---------------------------------------------------------------------------
# raycast
# ---------------------------------------------------------------------------

def test_perpendicular_wall_distance():
    plan = FloorPlan(name="wall", segments=make_box(-50, 3, 50, 10),
                     spawn_regions=[(-1, 0, 1, 1)])
    scan = raycast(plan, Pose(0.0, 0.0, math.pi / 2), fov=0.5, n_rays=9,
                   max_range=100.0)
    assert scan.depths[4] == pytest.approx(3.0, abs=1e-9)


def test_square_center_to_corner(square_plan):
    scan = raycast(square_plan, Pose(0.5, 0.5, math.pi / 4), fov=0.1,
                   n_rays=3, max_range=10.0)
    assert scan.depths[1] == pytest.approx(0.5 * math.sqrt(2), abs=1e-9)


def test_glass_reported_by_depths_but_not_first_opaque():
    segments = make_box(-10, -10, 10, 10)
    segments.append(Segment((-3, 2), (3, 2), glass()))
    segments.append(Segment((-3, 5), (3, 5), wall()))
    plan = FloorPlan(name="pane", segments=segments, spawn_regions=[(-1, -1, 1, 1)])
    scan = raycast(plan, Pose(0, 0, math.pi / 2), fov=0.2, n_rays=3, max_range=50.0)
    assert scan.depths[1] == pytest.approx(2.0, abs=1e-9)
    assert scan.first_opaque_depths[1] == pytest.approx(5.0, abs=1e-9)
    assert scan.hit_materials[1].depth_transparent


def test_miss_reports_max_range_and_sentinel():
    plan = FloorPlan(name="wall", segments=make_box(-50, 3, 50, 10),
                     spawn_regions=[(-1, 0, 1, 1)])
    scan = raycast(plan, Pose(0.0, 0.0, -math.pi / 2), fov=0.5, n_rays=5,
                   max_range=7.0)
    assert np.all(scan.depths == 7.0)
    assert all(m is None for m in scan.hit_materials)


def test_first_opaque_never_below_depths(rng):
    for trial in range(20):
        plan = random_plan(rng, with_glass=True)
        pose = random_free_pose(rng, plan)
        scan = raycast(plan, pose, fov=1.6, n_rays=32, max_range=60.0)
        assert np.all(scan.first_opaque_depths >= scan.depths - 1e-9)
        glass_hit = np.array([m is not None and m.depth_transparent
                              for m in scan.hit_materials])
        same = np.isclose(scan.first_opaque_depths, scan.depths)
        assert np.all(same | glass_hit)


def test_raycast_matches_marching_oracle(rng):
    max_range = 60.0
    for trial in range(30):
        plan = random_plan(rng, with_glass=(trial % 2 == 0))
        segs, opaque = plan_to_seg_array(plan)
        pose = random_free_pose(rng, plan)
        scan = raycast(plan, pose, fov=1.6, n_rays=16, max_range=max_range)
        from crashnav.world import ray_angles
        angles = ray_angles(pose.heading, 1.6, 16)
        ref = march_depths(pose.x, pose.y, angles, segs, max_range, False, opaque)
        np.testing.assert_allclose(scan.depths, ref, atol=2e-3)
        ref_op = march_depths(pose.x, pose.y, angles, segs, max_range, True, opaque)
        np.testing.assert_allclose(scan.first_opaque_depths, ref_op, atol=2e-3)


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def _facing_wall_plan():
    plan = FloorPlan(name="flat", segments=make_box(-50, -50, 50, 50),
                     spawn_regions=[(-1, -1, 1, 1)])
    return plan


def test_flat_wall_uniform_columns():
    plan = _facing_wall_plan()
    cam = Camera(fov=0.4, width=32, height=32)
    frame = render(plan, Pose(0.0, 47.0, math.pi / 2), cam)
    # narrow fov on a flat-texture wall: every column nearly identical
    spread = frame.pixels.max(axis=1) - frame.pixels.min(axis=1)
    assert spread.max() < 0.05


def test_render_deterministic(square_plan):
    cam = Camera()
    a = render(square_plan, Pose(0.5, 0.5, 0.3), cam)
    b = render(square_plan, Pose(0.5, 0.5, 0.3), cam)
    assert np.array_equal(a.pixels, b.pixels)


def _wall_band_height(frame):
    """Rows in the middle column not painted by the fixed sky/floor ramps."""
    h = frame.height
    rows = np.arange(h) + 0.5
    ceil = 0.30 + 0.12 * rows / (h / 2.0)
    floor = 0.25 + 0.30 * (rows - h / 2.0) / (h / 2.0)
    col = frame.pixels[:, frame.width // 2]
    is_ramp = (np.abs(col - np.round(ceil * 255) / 255) < 1e-9) | \
              (np.abs(col - np.round(floor * 255) / 255) < 1e-9)
    return int((~is_ramp).sum())


def test_wall_band_shrinks_with_distance():
    plan = _facing_wall_plan()
    cam = Camera(fov=0.6, width=32, height=64)
    heights = [
        _wall_band_height(render(plan, Pose(0.0, 50.0 - d, math.pi / 2), cam))
        for d in (2.0, 4.0, 8.0, 16.0)
    ]
    assert heights == sorted(heights, reverse=True)
    assert heights[0] > heights[-1]


def test_glass_renders_back_wall_geometry_plus_tint():
    # glass 1 m ahead, textured back wall 6 m ahead
    segments = make_box(-50, -50, 50, 50)
    segments.append(Segment((-5, 1), (5, 1), glass()))
    segments.append(Segment((-50, 6), (50, 6), wall(texture_id=1)))
    plan = FloorPlan(name="pane", segments=segments, spawn_regions=[(-1, -1, 1, 1)])
    cam = Camera(fov=0.5, width=32, height=64)
    frame = render(plan, Pose(0.0, 0.0, math.pi / 2), cam)

    # column height follows the 6 m wall, not the 1 m pane; ramp rows may be
    # shifted by the flat glass tint, so accept ramp and ramp+tint as sky/floor
    half = cam.height / 2.0
    tan_vhalf = math.tan(cam.fov / 2.0) * cam.height / cam.width
    expected = 2 * (2.5 / 2.0) / 6.0 * (half / tan_vhalf)
    rows = np.arange(cam.height) + 0.5
    ceil = 0.30 + 0.12 * rows / half
    floor = 0.25 + 0.30 * (rows - half) / half
    col = frame.pixels[:, cam.width // 2]
    is_ramp = np.zeros(cam.height, dtype=bool)
    for base in (ceil, floor):
        for tint in (0.0, 0.06):
            is_ramp |= np.abs(col - np.round((base + tint) * 255) / 255) < 1e-9
    got = int((~is_ramp).sum())
    assert got == pytest.approx(expected, abs=2.0)

    # same scene without the pane: center pixels shift by the glass tint
    plan_clear = FloorPlan(name="clear", segments=segments[:-2] + [segments[-1]],
                           spawn_regions=[(-1, -1, 1, 1)])
    bare = render(plan_clear, Pose(0.0, 0.0, math.pi / 2), cam)
    mid = cam.height // 2
    c = cam.width // 2
    diff = frame.pixels[mid, c] - bare.pixels[mid, c]
    assert diff == pytest.approx(0.06, abs=2 / 255)


def test_render_rejects_tiny_camera(square_plan):
    with pytest.raises(ValueError):
        render(square_plan, Pose(0.5, 0.5, 0.0), Camera(width=4, height=4))


def test_frame_u8_round_trip(square_plan):
    frame = render(square_plan, Pose(0.5, 0.5, 1.0), Camera())
    again = Frame.from_u8(frame.to_u8())
    assert np.array_equal(frame.pixels, again.pixels)


def test_flat_texture_has_zero_variance():
    u = np.linspace(0, 10, 50)
    v = np.linspace(0, 2.5, 50)
    vals = texture_intensity(np.zeros(50, dtype=int), u, v)
    assert np.ptp(vals) == 0.0


# ---------------------------------------------------------------------------
# collision_check
# ---------------------------------------------------------------------------

def test_collision_radius_boundary(square_plan):
    r = 0.25
    assert collision_check(square_plan, Pose(0.5, r + 1e-4, 0.0), r) is None
    contact = collision_check(square_plan, Pose(0.5, r - 1e-4, 0.0), r)
    assert contact is not None
    assert contact.segment_index == 0


def test_glass_is_solid_for_collision():
    segments = make_box(-5, -5, 5, 5)
    segments.append(Segment((-2, 1), (2, 1), glass()))
    plan = FloorPlan(name="pane", segments=segments, spawn_regions=[(-1, -1, 0, 0)])
    contact = collision_check(plan, Pose(0.0, 0.8, 0.0), 0.25)
    assert contact is not None
    assert contact.segment_index == 4


def test_contact_normal_is_unit(square_plan):
    contact = collision_check(square_plan, Pose(0.5, 0.1, 0.0), 0.25)
    assert np.hypot(*contact.normal) == pytest.approx(1.0)


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_collision_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    plan = random_plan(rng, max_interior=8, size=6.0)
    x = rng.uniform(0.0, 6.0)
    y = rng.uniform(0.0, 6.0)
    radius = rng.uniform(0.05, 0.6)
    expected = brute_force_contact(plan, x, y, radius)
    contact = collision_check(plan, Pose(x, y, 0.0), radius)
    if expected is None:
        assert contact is None
    else:
        assert contact is not None and contact.segment_index == expected


def test_no_contact_implies_clear_depths(rng):
    r = 0.25
    for _ in range(20):
        plan = random_plan(rng, size=8.0)
        pose = random_free_pose(rng, plan, size=8.0, clearance=0.26)
        assert collision_check(plan, pose, r) is None
        scan = raycast(plan, pose, fov=2 * math.pi - 1e-6, n_rays=180,
                       max_range=50.0)
        assert np.all(scan.depths >= r - 1e-6)


# ---------------------------------------------------------------------------
# pose
# ---------------------------------------------------------------------------

@given(st.floats(-100, 100, allow_nan=False))
def test_heading_wraps_into_range(h):
    p = Pose(0.0, 0.0, h)
    assert -math.pi <= p.heading < math.pi
    # wrapped heading points the same way
    assert math.cos(p.heading) == pytest.approx(math.cos(h), abs=1e-9)
    assert math.sin(p.heading) == pytest.approx(math.sin(h), abs=1e-9)
