"""Autonomous crash-data collection: random straight flights until collision,
PID backtracking to the episode start, and a policy-driven recollection mode."""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .vehicle import Command, NoiseModel, Simulator, VehicleState
from .world import Camera, FloorPlan, Frame, Pose, raycast, wrap_angle

TRAJECTORY_FORMAT_VERSION = 1
_MAGIC = b"CRASHNAV"

CRUISE_SPEED = 0.7       # m/s commanded during straight collection flights;
# matches the flight policy's cruise so the classifier's time-to-contact
# labels translate to the same clearance distances the policy sees
BACKTRACK_HEADING_GAIN = 2.0
STALL_WINDOW = 50        # ticks without progress before an episode is unrecoverable
STALL_PROGRESS = 0.01    # m of improvement that counts as progress
CONTACT_NUDGE = 0.06     # m the drone is pushed off the wall after a crash


class ArchiveError(ValueError):
    pass


class CollectionMode(enum.Enum):
    RANDOM_STRAIGHT = "random_straight"
    POLICY_DRIVEN = "policy_driven"


@dataclass(frozen=True)
class CollectConfig:
    epsilon: float = 0.3
    n_env_trial: int = 200
    max_trajectory_ticks: int = 600
    pid_kp: float = 0.8
    pid_ki: float = 0.0
    pid_kd: float = 0.2
    seed: int = 0
    # launches that immediately face a wall produce trajectories too short to
    # carry distinct safe/unsafe windows, which poisons the labels; reroll the
    # heading until a narrow forward cone is clear (keep the best try)
    min_launch_clearance: float = 4.0
    launch_rerolls: int = 20

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_env_trial < 1:
            raise ValueError("n_env_trial must be >= 1")


@dataclass(frozen=True)
class TickRecord:
    tick: int
    true_pose: Pose
    odom_pose: Pose
    frame: Frame
    accel_magnitude: float
    command: Command


@dataclass
class Trajectory:
    id: str
    environment_name: str
    records: list[TickRecord]
    ended_in_collision: bool
    collection_mode: CollectionMode

    def __post_init__(self):
        if not self.records:
            raise ValueError("trajectory must have at least one record")
        ticks = [r.tick for r in self.records]
        if any(b <= a for a, b in zip(ticks, ticks[1:])):
            raise ValueError("ticks must be strictly increasing")

    def __len__(self) -> int:
        return len(self.records)

    def frames_u8(self) -> np.ndarray:
        return np.stack([r.frame.to_u8() for r in self.records])


def _sample_spawn(plan: FloorPlan, rng: np.random.Generator) -> Pose:
    r = plan.spawn_regions[int(rng.integers(len(plan.spawn_regions)))]
    x = rng.uniform(r[0], r[2])
    y = rng.uniform(r[1], r[3])
    heading = rng.uniform(-math.pi, math.pi)
    return Pose(x, y, heading)


_LAUNCH_CONE = math.radians(16)  # a bit wider than the airframe subtends at 4 m


def _launch_heading(plan: FloorPlan, pose: Pose, cfg: CollectConfig,
                    rng: np.random.Generator) -> float:
    """Random heading whose forward cone is clear of any surface (glass stops
    the airframe too, so transparency is ignored); best-of on give-up."""
    best_heading, best_clear = 0.0, -1.0
    for _ in range(max(1, cfg.launch_rerolls)):
        heading = rng.uniform(-math.pi, math.pi)
        scan = raycast(plan, Pose(pose.x, pose.y, heading), _LAUNCH_CONE, 7,
                       cfg.min_launch_clearance)
        clear = float(scan.depths.min())
        if clear >= cfg.min_launch_clearance:
            return heading
        if clear > best_clear:
            best_heading, best_clear = heading, clear
    return best_heading


def _nudge_off_wall(state: VehicleState) -> VehicleState:
    nx, ny = state.last_contact_normal or (1.0, 0.0)
    pose = Pose(state.pose.x + CONTACT_NUDGE * nx, state.pose.y + CONTACT_NUDGE * ny,
                state.pose.heading)
    return VehicleState(pose=pose, odom_offset=state.odom_offset)


def _backtrack(sim: Simulator, cfg: CollectConfig, target_xy: np.ndarray,
               last_odom: Pose) -> tuple[bool, Pose]:
    """PID-home on odometry toward target_xy. Returns (recovered, last odom pose)."""
    integral = 0.0
    prev_err = None
    best = math.inf
    since_progress = 0
    odom = last_odom
    while True:
        err_vec = target_xy - np.array([odom.x, odom.y])
        err = float(np.hypot(*err_vec))
        if err <= cfg.epsilon:
            return True, odom
        if err < best - STALL_PROGRESS:
            best = err
            since_progress = 0
        else:
            since_progress += 1
            if since_progress >= STALL_WINDOW:
                return False, odom
        integral += err * sim.dt
        deriv = 0.0 if prev_err is None else (err - prev_err) / sim.dt
        prev_err = err
        linear = cfg.pid_kp * err + cfg.pid_ki * integral + cfg.pid_kd * deriv
        desired = math.atan2(err_vec[1], err_vec[0])
        herr = wrap_angle(desired - sim.state.pose.heading)
        angular = BACKTRACK_HEADING_GAIN * herr
        if abs(herr) > 1.0:
            linear = 0.0
        reading = sim.step(Command(linear, angular), render_frame=False)
        odom = reading.odom_pose_estimate
        if sim.state.collided:
            return False, odom


def _collect(
    plan: FloorPlan,
    cfg: CollectConfig,
    policy: Optional[Callable[[Frame], Command]],
    noise: NoiseModel,
    camera: Camera,
    tallies: Optional[dict] = None,
) -> list[Trajectory]:
    mode = CollectionMode.RANDOM_STRAIGHT if policy is None else CollectionMode.POLICY_DRIVEN
    sim = Simulator(plan, noise, Pose(0, 0, 0), seed=cfg.seed, camera=camera)
    rng = sim.rng
    sim.reset(_sample_spawn(plan, rng))
    last_odom = sim.state.pose
    trajectories: list[Trajectory] = []
    seq = 0
    t = tallies if tallies is not None else {}
    t.setdefault("timeouts", 0)
    t.setdefault("respawns", 0)

    while len(trajectories) < cfg.n_env_trial:
        if mode is CollectionMode.RANDOM_STRAIGHT:
            heading = _launch_heading(plan, sim.state.pose, cfg, rng)
            sim.state = replace(sim.state, pose=Pose(sim.state.pose.x, sim.state.pose.y, heading))
        start_odom_xy = np.array([last_odom.x, last_odom.y])

        records: list[TickRecord] = []
        collided = False
        for tick in range(cfg.max_trajectory_ticks):
            if mode is CollectionMode.RANDOM_STRAIGHT:
                cmd = Command(CRUISE_SPEED, 0.0)
            else:
                cmd = policy(sim.render())
            reading = sim.step(cmd, render_frame=True)
            records.append(TickRecord(
                tick=tick,
                true_pose=sim.state.pose,
                odom_pose=reading.odom_pose_estimate,
                frame=reading.frame,
                accel_magnitude=reading.accel_magnitude,
                command=cmd,
            ))
            last_odom = reading.odom_pose_estimate
            if sim.state.collided:
                collided = True
                break

        if collided:
            trajectories.append(Trajectory(
                id=f"{plan.name}/{mode.value}/{seq}",
                environment_name=plan.name,
                records=records,
                ended_in_collision=True,
                collection_mode=mode,
            ))
            seq += 1
            sim.state = _nudge_off_wall(sim.state)
            recovered, last_odom = _backtrack(sim, cfg, start_odom_xy, last_odom)
            if not recovered:
                t["respawns"] += 1
                sim.reset(_sample_spawn(plan, rng))
                last_odom = sim.state.pose
        else:
            t["timeouts"] += 1
            if mode is CollectionMode.POLICY_DRIVEN:
                trajectories.append(Trajectory(
                    id=f"{plan.name}/{mode.value}/{seq}",
                    environment_name=plan.name,
                    records=records,
                    ended_in_collision=False,
                    collection_mode=mode,
                ))
                seq += 1
    return trajectories


def collect_random(
    plan: FloorPlan,
    cfg: CollectConfig,
    noise: NoiseModel = NoiseModel(),
    camera: Camera = Camera(),
    tallies: Optional[dict] = None,
) -> list[Trajectory]:
    """Random-direction straight flights until collision, n_env_trial crashes."""
    return _collect(plan, cfg, None, noise, camera, tallies)


def collect_with_policy(
    plan: FloorPlan,
    cfg: CollectConfig,
    policy: Callable[[Frame], Command],
    noise: NoiseModel = NoiseModel(),
    camera: Camera = Camera(),
    tallies: Optional[dict] = None,
) -> list[Trajectory]:
    """Hard-negative recollection: episodes flown by `policy`; crashes are the
    current policy's failures, timeouts are kept as positive-only episodes."""
    return _collect(plan, cfg, policy, noise, camera, tallies)


# ---------------------------------------------------------------------------
# Trajectory archive
#
# Byte layout (little endian):
#   8 bytes  magic "CRASHNAV"
#   u32      format_version
#   u32      header length H
#   H bytes  UTF-8 JSON header: {"kind": "trajectory_archive",
#            "frame_width": int, "frame_height": int, "seed_note": str,
#            "trajectories": [{"id", "environment_name", "ended_in_collision",
#                              "collection_mode", "n_records"} ...]}
#   then per trajectory, in header order:
#     u32[n]        ticks
#     f64[n, 3]     true poses (x, y, heading)
#     f64[n, 3]     odometry poses
#     f64[n]        accelerometer magnitude
#     f64[n, 2]     commands (linear, angular)
#     u8[n, h, w]   frames, row-major grayscale planes
# ---------------------------------------------------------------------------

def write_trajectories(trajectories: list[Trajectory], path, seed_note: str = "") -> None:
    if not trajectories:
        raise ArchiveError("refusing to write an empty archive")
    h = trajectories[0].records[0].frame.height
    w = trajectories[0].records[0].frame.width
    header = {
        "kind": "trajectory_archive",
        "frame_width": w,
        "frame_height": h,
        "seed_note": seed_note,
        "trajectories": [
            {
                "id": t.id,
                "environment_name": t.environment_name,
                "ended_in_collision": t.ended_in_collision,
                "collection_mode": t.collection_mode.value,
                "n_records": len(t.records),
            }
            for t in trajectories
        ],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", TRAJECTORY_FORMAT_VERSION, len(blob)))
        f.write(blob)
        for t in trajectories:
            n = len(t.records)
            f.write(np.array([r.tick for r in t.records], dtype=np.uint32).tobytes())
            poses = np.array(
                [[r.true_pose.x, r.true_pose.y, r.true_pose.heading] for r in t.records])
            f.write(poses.tobytes())
            odom = np.array(
                [[r.odom_pose.x, r.odom_pose.y, r.odom_pose.heading] for r in t.records])
            f.write(odom.tobytes())
            f.write(np.array([r.accel_magnitude for r in t.records]).tobytes())
            f.write(np.array([[r.command.linear, r.command.angular] for r in t.records]).tobytes())
            f.write(t.frames_u8().tobytes())


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise ArchiveError("truncated archive")
    return buf


def read_trajectories(path) -> list[Trajectory]:
    with open(path, "rb") as f:
        if _read_exact(f, 8) != _MAGIC:
            raise ArchiveError("not a crashnav archive")
        version, hlen = struct.unpack("<II", _read_exact(f, 8))
        if version != TRAJECTORY_FORMAT_VERSION:
            raise ArchiveError(f"unsupported archive format_version {version}")
        header = json.loads(_read_exact(f, hlen).decode("utf-8"))
        if header.get("kind") != "trajectory_archive":
            raise ArchiveError("wrong archive kind")
        w, h = header["frame_width"], header["frame_height"]
        out = []
        for meta in header["trajectories"]:
            n = meta["n_records"]
            ticks = np.frombuffer(_read_exact(f, 4 * n), dtype=np.uint32)
            poses = np.frombuffer(_read_exact(f, 8 * 3 * n)).reshape(n, 3)
            odom = np.frombuffer(_read_exact(f, 8 * 3 * n)).reshape(n, 3)
            accel = np.frombuffer(_read_exact(f, 8 * n))
            cmds = np.frombuffer(_read_exact(f, 8 * 2 * n)).reshape(n, 2)
            frames = np.frombuffer(_read_exact(f, n * h * w), dtype=np.uint8).reshape(n, h, w)
            records = [
                TickRecord(
                    tick=int(ticks[i]),
                    true_pose=Pose(*poses[i]),
                    odom_pose=Pose(*odom[i]),
                    frame=Frame.from_u8(frames[i]),
                    accel_magnitude=float(accel[i]),
                    command=Command(*cmds[i]),
                )
                for i in range(n)
            ]
            out.append(Trajectory(
                id=meta["id"],
                environment_name=meta["environment_name"],
                records=records,
                ended_in_collision=meta["ended_in_collision"],
                collection_mode=CollectionMode(meta["collection_mode"]),
            ))
        if f.read(1):
            raise ArchiveError("trailing bytes after archive payload")
    return out
