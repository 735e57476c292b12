"""Benchmark harness: trial termination rules, the small-loop detector,
determinism, and the comparison table."""

import json
import math

import numpy as np
import pytest

from crashnav.baselines import ExternalCommand
from crashnav.bench import (
    BenchArtifacts,
    BenchConfigError,
    MethodKind,
    SmallLoopSpec,
    Termination,
    TrialSpec,
    ordering_report,
    run_benchmark,
    run_trial,
    table_to_json,
    table_to_text,
)
from crashnav.learn import init_params
from crashnav.world import Camera, FloorPlan, Pose, Segment, wall

from conftest import make_box, unit_square_plan
from test_learn import toy_spec


def small_camera():
    return Camera(width=16, height=16)


def toy_params():
    return init_params(toy_spec(), seed=0)


@pytest.fixture(scope="module")
def room():
    return unit_square_plan(spawn=(3, 3, 7, 7), size=10.0)


class TestRunTrial:
    def test_straight_trial_ends_in_collision(self, room):
        art = BenchArtifacts(plan=room, camera=small_camera())
        res = run_trial(TrialSpec("room", MethodKind.BEST_STRAIGHT, seed=1), art)
        assert res.termination is Termination.COLLISION
        assert res.distance_before_collision > 0.0
        assert res.time_before_collision > 0.0
        assert res.poses.ndim == 2 and res.poses.shape[1] == 3

    def test_distance_matches_pose_trace(self, room):
        art = BenchArtifacts(plan=room, camera=small_camera())
        res = run_trial(TrialSpec("room", MethodKind.BEST_STRAIGHT, seed=2), art)
        steps = np.diff(res.poses[:, :2], axis=0)
        assert res.distance_before_collision == pytest.approx(
            float(np.hypot(steps[:, 0], steps[:, 1]).sum()), rel=1e-9)

    def test_learned_requires_checkpoint(self, room):
        art = BenchArtifacts(plan=room, camera=small_camera())
        with pytest.raises(BenchConfigError):
            run_trial(TrialSpec("room", MethodKind.LEARNED, seed=1), art)

    def test_learned_records_probability_trace(self, room):
        art = BenchArtifacts(plan=room, params=toy_params(),
                             camera=small_camera())
        res = run_trial(TrialSpec("room", MethodKind.LEARNED, seed=1,
                                  max_time=12.0), art)
        assert res.prob_trace is not None
        assert res.prob_trace.shape[1] == 3
        assert np.all((res.prob_trace >= 0) & (res.prob_trace <= 1))

    def test_small_loop_detector_fires_on_idling(self, room):
        # an external operator sending zero velocity never moves: after the
        # trailing window the net displacement is below the floor
        art = BenchArtifacts(
            plan=room, camera=small_camera(),
            command_timeline=[(0, ExternalCommand(0.0, 0.0, 0.0))])
        res = run_trial(TrialSpec("room", MethodKind.EXTERNAL, seed=1), art)
        assert res.termination is Termination.SMALL_LOOP
        assert res.time_before_collision == pytest.approx(
            SmallLoopSpec().window, abs=0.2)

    def test_tight_circle_trips_small_loop(self, room):
        art = BenchArtifacts(
            plan=room, camera=small_camera(),
            command_timeline=[(0, ExternalCommand(0.2, 1.0, 0.0))])
        res = run_trial(TrialSpec("room", MethodKind.EXTERNAL, seed=1), art)
        assert res.termination is Termination.SMALL_LOOP

    def test_time_cap(self, room):
        # drive a slow wide arc that keeps moving: neither crash nor loop
        art = BenchArtifacts(
            plan=room, camera=small_camera(),
            command_timeline=[(0, ExternalCommand(0.6, 0.25, 0.0))])
        res = run_trial(TrialSpec("room", MethodKind.EXTERNAL, seed=1,
                                  max_time=6.0,
                                  small_loop=SmallLoopSpec(window=3.0)), art)
        assert res.termination is Termination.TIME_CAP
        assert res.time_before_collision == pytest.approx(6.0)

    def test_disconnect_terminates(self, room):
        art = BenchArtifacts(
            plan=room, camera=small_camera(),
            command_timeline=[(0, ExternalCommand(0.5, 0.0, 0.0))],
            disconnect_tick=10)
        res = run_trial(TrialSpec("room", MethodKind.EXTERNAL, seed=1), art)
        assert res.termination is Termination.DISCONNECT

    def test_external_requires_timeline(self, room):
        art = BenchArtifacts(plan=room, camera=small_camera())
        with pytest.raises(BenchConfigError):
            run_trial(TrialSpec("room", MethodKind.EXTERNAL, seed=1), art)

    def test_rejects_bad_spec(self):
        with pytest.raises(ValueError):
            TrialSpec("room", MethodKind.BEST_STRAIGHT, seed=1, max_time=0.0)

    def test_trial_bit_identical_across_reruns(self, room):
        art = BenchArtifacts(plan=room, params=toy_params(),
                             camera=small_camera())
        spec = TrialSpec("room", MethodKind.LEARNED, seed=3, max_time=20.0)
        a = run_trial(spec, art)
        b = run_trial(spec, art)
        assert a.termination is b.termination
        assert a.distance_before_collision == b.distance_before_collision
        np.testing.assert_array_equal(a.poses, b.poses)
        np.testing.assert_array_equal(a.prob_trace, b.prob_trace)


@pytest.fixture(scope="module")
def table():
    room = unit_square_plan(spawn=(3, 3, 7, 7), size=10.0)
    plans = {"room": room}
    arts = {"room": BenchArtifacts(plan=room, params=toy_params(),
                                   camera=small_camera())}
    return run_benchmark(plans,
                         [MethodKind.BEST_STRAIGHT, MethodKind.DEPTH_ORACLE,
                          MethodKind.LEARNED],
                         arts, seeds=(1, 2), max_time=15.0)


class TestBenchmarkTable:

    def test_cells_cover_grid(self, table):
        assert set(table.cells) == {("room", MethodKind.BEST_STRAIGHT),
                                    ("room", MethodKind.DEPTH_ORACLE),
                                    ("room", MethodKind.LEARNED)}
        assert table.runs_per_cell == 2

    def test_cell_means_match_runs(self, table):
        for cell in table.cells.values():
            assert cell["mean_distance"] == pytest.approx(
                float(np.mean([r["distance"] for r in cell["runs"]])))
            assert cell["mean_time"] == pytest.approx(
                float(np.mean([r["time"] for r in cell["runs"]])))

    def test_json_roundtrip(self, table):
        data = json.loads(table_to_json(table))
        assert data["runs_per_cell"] == 2
        assert {c["environment"] for c in data["cells"]} == {"room"}
        assert {c["method"] for c in data["cells"]} == {
            "best_straight", "depth_oracle", "learned"}

    def test_text_mentions_methods(self, table):
        text = table_to_text(table)
        assert "room" in text
        assert "Best Straight" in text

    def test_ordering_report_keys(self, table):
        report = ordering_report(table)
        assert set(report) == {"room"}
        assert isinstance(report["room"], bool)
