"""Planar unicycle drone: noisy actuation, drifting odometry, crash-spiking
accelerometer, stepped at a fixed tick."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .world import (
    DRONE_RADIUS,
    Camera,
    FloorPlan,
    Frame,
    Pose,
    collision_check,
    render,
    wrap_angle,
)

V_MAX = 1.0        # m/s
OMEGA_MAX = 1.2    # rad/s
DT = 0.1           # s, control tick

# accel spike must clear 6 sigma of free-flight noise to be detectable
ACCEL_DETECT_SIGMA = 6.0


@dataclass(frozen=True)
class Command:
    linear: float
    angular: float

    def __post_init__(self):
        object.__setattr__(self, "linear", float(min(max(self.linear, 0.0), V_MAX)))
        object.__setattr__(self, "angular", float(min(max(self.angular, -OMEGA_MAX), OMEGA_MAX)))


@dataclass(frozen=True)
class NoiseModel:
    heading_drift_std: float = 0.03   # rad / sqrt(s)
    speed_jitter_std: float = 0.10    # fraction of commanded speed
    odom_drift_std: float = 0.02      # m / sqrt(s)
    accel_noise_std: float = 0.2      # m/s^2
    accel_spike_mean: float = 8.0     # m/s^2
    seed: int = 0

    def __post_init__(self):
        if min(self.heading_drift_std, self.speed_jitter_std, self.odom_drift_std,
               self.accel_noise_std) < 0:
            raise ValueError("noise stds must be nonnegative")
        if self.accel_spike_mean <= ACCEL_DETECT_SIGMA * self.accel_noise_std:
            raise ValueError("accel spike must exceed 6x accel noise to be detectable")

    @property
    def detection_threshold(self) -> float:
        # midpoint between the 6-sigma noise band and the spike mean
        return (ACCEL_DETECT_SIGMA * self.accel_noise_std + self.accel_spike_mean) / 2.0


ZERO_NOISE = NoiseModel(0.0, 0.0, 0.0, 0.0, 8.0, 0)


@dataclass(frozen=True)
class VehicleState:
    pose: Pose
    linear_velocity: float = 0.0
    angular_velocity: float = 0.0
    collided: bool = False
    last_contact_normal: Optional[tuple[float, float]] = None
    odom_offset: tuple[float, float] = (0.0, 0.0)  # accumulated odometry drift


@dataclass(frozen=True)
class SensorReading:
    odom_pose_estimate: Pose
    accel_magnitude: float
    frame: Optional[Frame]


def _contact_clamp(plan: FloorPlan, p0: Pose, p1: Pose, radius: float):
    """Earliest contact pose along the straight move p0 -> p1, by bisection."""
    lo, hi = 0.0, 1.0
    for _ in range(24):
        mid = (lo + hi) / 2.0
        pose = Pose(p0.x + mid * (p1.x - p0.x), p0.y + mid * (p1.y - p0.y), p1.heading)
        if collision_check(plan, pose, radius) is None:
            lo = mid
        else:
            hi = mid
    pose = Pose(p0.x + lo * (p1.x - p0.x), p0.y + lo * (p1.y - p0.y), p1.heading)
    contact_pose = Pose(p0.x + hi * (p1.x - p0.x), p0.y + hi * (p1.y - p0.y), p1.heading)
    contact = collision_check(plan, contact_pose, radius)
    return pose, contact


def step(
    state: VehicleState,
    cmd: Command,
    plan: FloorPlan,
    noise: NoiseModel,
    dt: float,
    rng: np.random.Generator,
    camera: Optional[Camera] = None,
) -> tuple[VehicleState, SensorReading]:
    """One Euler tick of the unicycle with actuation/sensor noise.

    Renders a frame only when `camera` is given (backtracking and Monte-Carlo
    utilities skip rendering).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.collided:
        raise ValueError("cannot step a collided state; reset first")

    v = cmd.linear * (1.0 + noise.speed_jitter_std * rng.standard_normal())
    v = min(max(v, 0.0), V_MAX)
    drift = noise.heading_drift_std * math.sqrt(dt) * rng.standard_normal()
    heading = wrap_angle(state.pose.heading + cmd.angular * dt + drift)
    p0 = state.pose
    p1 = Pose(p0.x + v * dt * math.cos(heading), p0.y + v * dt * math.sin(heading), heading)

    contact = collision_check(plan, p1, DRONE_RADIUS)
    if contact is not None:
        clamped, contact_at = _contact_clamp(plan, p0, p1, DRONE_RADIUS)
        normal = contact_at.normal if contact_at is not None else contact.normal
        new_state = VehicleState(
            pose=clamped,
            linear_velocity=0.0,
            angular_velocity=0.0,
            collided=True,
            last_contact_normal=normal,
            odom_offset=state.odom_offset,
        )
        accel = abs(noise.accel_spike_mean + noise.accel_noise_std * rng.standard_normal())
    else:
        new_state = VehicleState(
            pose=p1,
            linear_velocity=v,
            angular_velocity=cmd.angular,
            collided=False,
            last_contact_normal=None,
            odom_offset=state.odom_offset,
        )
        accel = abs(noise.accel_noise_std * rng.standard_normal())

    # odometry drift random walk (position only; heading estimate stays true)
    step_std = noise.odom_drift_std * math.sqrt(dt)
    ox = new_state.odom_offset[0] + step_std * rng.standard_normal()
    oy = new_state.odom_offset[1] + step_std * rng.standard_normal()
    new_state = replace(new_state, odom_offset=(ox, oy))
    odom = Pose(new_state.pose.x + ox, new_state.pose.y + oy, new_state.pose.heading)

    frame = render(plan, new_state.pose, camera) if camera is not None else None
    return new_state, SensorReading(odom_pose_estimate=odom, accel_magnitude=accel, frame=frame)


class Simulator:
    """Single-owner stepped simulation: one drone in one floorplan."""

    def __init__(
        self,
        plan: FloorPlan,
        noise: NoiseModel,
        start: Pose,
        seed: int,
        camera: Camera = Camera(),
        dt: float = DT,
    ):
        self.plan = plan
        self.noise = noise
        self.camera = camera
        self.dt = dt
        self.rng = np.random.default_rng(seed)
        self.state = VehicleState(pose=start)
        self.tick = 0

    def step(self, cmd: Command, render_frame: bool = True) -> SensorReading:
        self.state, reading = step(
            self.state, cmd, self.plan, self.noise, self.dt, self.rng,
            self.camera if render_frame else None,
        )
        self.tick += 1
        return reading

    def render(self) -> Frame:
        return render(self.plan, self.state.pose, self.camera)

    def reset(self, start: Pose) -> None:
        self.state = VehicleState(pose=start)


def straight_line_drift(
    distance: float,
    noise: NoiseModel,
    n_runs: int,
    speed: float = 0.8,
    dt: float = DT,
) -> np.ndarray:
    """Lateral deviations after open-loop straight flight over `distance`.

    Monte-Carlo calibration utility: no walls, command straight along +x,
    report |y| once x >= distance (or at the tick cap).
    """
    if distance <= 0:
        raise ValueError("distance must be positive")
    rng = np.random.default_rng(noise.seed)
    deviations = np.empty(n_runs)
    max_ticks = int(4 * distance / (speed * dt))
    for run in range(n_runs):
        x = y = 0.0
        heading = 0.0
        for _ in range(max_ticks):
            v = speed * (1.0 + noise.speed_jitter_std * rng.standard_normal())
            v = min(max(v, 0.0), V_MAX)
            heading = wrap_angle(
                heading + noise.heading_drift_std * math.sqrt(dt) * rng.standard_normal()
            )
            x += v * dt * math.cos(heading)
            y += v * dt * math.sin(heading)
            if x >= distance:
                break
        deviations[run] = abs(y)
    return deviations
