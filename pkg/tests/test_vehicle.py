"""Unicycle stepping: command clamps, noise model, collision clamping,
accelerometer spikes, odometry drift and determinism."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crashnav.vehicle import (
    ACCEL_DETECT_SIGMA,
    Command,
    DT,
    NoiseModel,
    OMEGA_MAX,
    Simulator,
    V_MAX,
    VehicleState,
    ZERO_NOISE,
    step,
    straight_line_drift,
)
from crashnav.world import DRONE_RADIUS, Pose, collision_check

from conftest import unit_square_plan


@pytest.fixture
def square():
    return unit_square_plan(size=10.0)


def mid_pose(heading=0.0):
    return Pose(5.0, 5.0, heading)


class TestCommand:
    def test_clamps_linear_to_speed_range(self):
        assert Command(2.5, 0.0).linear == V_MAX
        assert Command(-1.0, 0.0).linear == 0.0

    def test_clamps_angular_symmetrically(self):
        assert Command(0.0, 9.0).angular == OMEGA_MAX
        assert Command(0.0, -9.0).angular == -OMEGA_MAX

    @given(st.floats(-5, 5, allow_nan=False), st.floats(-5, 5, allow_nan=False))
    def test_always_within_limits(self, lin, ang):
        c = Command(lin, ang)
        assert 0.0 <= c.linear <= V_MAX
        assert -OMEGA_MAX <= c.angular <= OMEGA_MAX


class TestNoiseModel:
    def test_rejects_negative_std(self):
        with pytest.raises(ValueError):
            NoiseModel(heading_drift_std=-0.1)

    def test_rejects_undetectable_spike(self):
        # spike mean must clear the 6-sigma free-flight band
        with pytest.raises(ValueError):
            NoiseModel(accel_noise_std=2.0, accel_spike_mean=10.0)

    def test_detection_threshold_separates_bands(self):
        nm = NoiseModel()
        assert ACCEL_DETECT_SIGMA * nm.accel_noise_std < nm.detection_threshold
        assert nm.detection_threshold < nm.accel_spike_mean


class TestStep:
    def test_zero_noise_moves_exactly(self, square):
        state = VehicleState(pose=mid_pose(heading=0.3))
        rng = np.random.default_rng(0)
        new, reading = step(state, Command(0.5, 0.0), square, ZERO_NOISE, DT, rng)
        assert new.pose.x == pytest.approx(5.0 + 0.05 * math.cos(0.3))
        assert new.pose.y == pytest.approx(5.0 + 0.05 * math.sin(0.3))
        assert new.pose.heading == pytest.approx(0.3)
        assert not new.collided

    def test_angular_integrates_heading(self, square):
        state = VehicleState(pose=mid_pose())
        rng = np.random.default_rng(0)
        new, _ = step(state, Command(0.0, 1.0), square, ZERO_NOISE, DT, rng)
        assert new.pose.heading == pytest.approx(DT)

    def test_rejects_nonpositive_dt(self, square):
        with pytest.raises(ValueError):
            step(VehicleState(pose=mid_pose()), Command(0.5, 0), square,
                 ZERO_NOISE, 0.0, np.random.default_rng(0))

    def test_rejects_stepping_collided_state(self, square):
        state = VehicleState(pose=mid_pose(), collided=True)
        with pytest.raises(ValueError):
            step(state, Command(0.5, 0), square, ZERO_NOISE, DT,
                 np.random.default_rng(0))

    def test_collision_clamps_at_contact(self, square):
        # start one step away from the east wall, command straight at it
        state = VehicleState(pose=Pose(10.0 - DRONE_RADIUS - 0.05, 5.0, 0.0))
        rng = np.random.default_rng(0)
        new, _ = step(state, Command(1.0, 0.0), square, ZERO_NOISE, DT, rng)
        assert new.collided
        # clamped pose sits at (or just outside) the contact distance
        assert new.pose.x <= 10.0 - DRONE_RADIUS + 1e-6
        assert collision_check(square, new.pose, DRONE_RADIUS - 1e-6) is None
        nx, ny = new.last_contact_normal
        assert math.hypot(nx, ny) == pytest.approx(1.0)
        assert new.linear_velocity == 0.0

    def test_collision_spikes_accelerometer(self, square):
        noise = NoiseModel()
        threshold = noise.detection_threshold
        hits = 0
        for seed in range(50):
            state = VehicleState(pose=Pose(10.0 - DRONE_RADIUS - 0.05, 5.0, 0.0))
            rng = np.random.default_rng(seed)
            new, reading = step(state, Command(1.0, 0.0), square, noise, DT, rng)
            assert new.collided
            hits += reading.accel_magnitude >= threshold
        assert hits == 50

    def test_free_flight_accel_below_threshold(self, square):
        noise = NoiseModel()
        rng = np.random.default_rng(3)
        state = VehicleState(pose=mid_pose())
        for _ in range(200):
            state, reading = step(state, Command(0.2, 0.1), square, noise, DT, rng)
            assert reading.accel_magnitude < noise.detection_threshold
            assert not state.collided

    def test_zero_odom_drift_tracks_truth(self, square):
        noise = NoiseModel(odom_drift_std=0.0)
        rng = np.random.default_rng(1)
        state = VehicleState(pose=mid_pose())
        for _ in range(20):
            state, reading = step(state, Command(0.4, 0.2), square, noise, DT, rng)
        est = reading.odom_pose_estimate
        assert est.x == pytest.approx(state.pose.x)
        assert est.y == pytest.approx(state.pose.y)

    def test_odom_drift_accumulates(self, square):
        noise = NoiseModel()
        rng = np.random.default_rng(1)
        state = VehicleState(pose=mid_pose())
        for _ in range(300):
            state, reading = step(state, Command(0.0, 0.0), square, noise, DT, rng)
        est = reading.odom_pose_estimate
        assert math.hypot(est.x - state.pose.x, est.y - state.pose.y) > 0.0

    def test_renders_only_when_camera_given(self, square):
        from crashnav.world import Camera
        rng = np.random.default_rng(0)
        _, without = step(VehicleState(pose=mid_pose()), Command(0.1, 0), square,
                          ZERO_NOISE, DT, rng)
        assert without.frame is None
        rng = np.random.default_rng(0)
        _, with_cam = step(VehicleState(pose=mid_pose()), Command(0.1, 0), square,
                           ZERO_NOISE, DT, rng, camera=Camera())
        assert with_cam.frame is not None


class TestSimulator:
    def test_same_seed_same_trajectory(self, square):
        def run(seed):
            sim = Simulator(square, NoiseModel(seed=seed), mid_pose(0.7), seed=seed)
            traj = []
            for _ in range(100):
                sim.step(Command(0.5, 0.3), render_frame=False)
                traj.append((sim.state.pose.x, sim.state.pose.y, sim.state.pose.heading))
            return traj

        assert run(11) == run(11)
        assert run(11) != run(12)

    def test_tick_counter_and_reset(self, square):
        sim = Simulator(square, ZERO_NOISE, mid_pose(), seed=0)
        sim.step(Command(0.2, 0.0), render_frame=False)
        sim.step(Command(0.2, 0.0), render_frame=False)
        assert sim.tick == 2
        sim.reset(mid_pose(1.0))
        assert sim.state.pose.heading == 1.0
        assert not sim.state.collided


class TestStraightLineDrift:
    def test_zero_noise_zero_deviation(self):
        dev = straight_line_drift(5.0, ZERO_NOISE, n_runs=10)
        assert dev.shape == (10,)
        assert np.all(dev == 0.0)

    def test_deviation_grows_with_drift(self):
        low = straight_line_drift(10.0, NoiseModel(seed=5), n_runs=200)
        high = straight_line_drift(
            10.0, NoiseModel(heading_drift_std=0.12, seed=5), n_runs=200)
        assert np.mean(high) > np.mean(low) > 0.0

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            straight_line_drift(0.0, NoiseModel(), n_runs=1)
