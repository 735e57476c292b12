"""Trial runner and aggregation: 5 seeded runs per (environment, method),
average distance and time before collision, small-loop termination."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .baselines import (
    CommandSource,
    DepthPolicyConfig,
    DepthPolicyRunner,
    ExternalCommand,
    best_straight_heading,
    external_command_policy,
)
from .learn import NetworkParams
from .policy import Mode, PolicyConfig, PolicyState, decide, three_way_probabilities
from .vehicle import Command, DT, NoiseModel, Simulator
from .world import Camera, FloorPlan, Pose, raycast

RESULTS_FORMAT_VERSION = 1


class MethodKind(enum.Enum):
    LEARNED = "learned"
    BEST_STRAIGHT = "best_straight"
    DEPTH_ORACLE = "depth_oracle"
    EXTERNAL = "external"


class Termination(enum.Enum):
    COLLISION = "collision"
    SMALL_LOOP = "small_loop"
    TIME_CAP = "time_cap"
    DISCONNECT = "disconnect"


@dataclass(frozen=True)
class SmallLoopSpec:
    window: float = 10.0              # seconds
    min_net_displacement: float = 0.5  # meters


@dataclass(frozen=True)
class TrialSpec:
    plan_name: str
    method: MethodKind
    seed: int
    start: Optional[Pose] = None      # None = sampled from spawn regions
    max_time: float = 300.0
    small_loop: SmallLoopSpec = SmallLoopSpec()

    def __post_init__(self):
        if self.max_time <= 0:
            raise ValueError("max_time must be positive")
        if self.small_loop.window >= self.max_time:
            raise ValueError("small-loop window must be below max_time")


@dataclass
class TrialResult:
    distance_before_collision: float
    time_before_collision: float
    termination: Termination
    poses: np.ndarray                 # (n, 3) true pose trace
    prob_trace: Optional[np.ndarray] = None  # (n, 3) for the learned method


@dataclass
class BenchArtifacts:
    plan: FloorPlan
    params: Optional[NetworkParams] = None
    policy_cfg: PolicyConfig = PolicyConfig()
    depth_cfg: DepthPolicyConfig = DepthPolicyConfig()
    noise: NoiseModel = NoiseModel()
    camera: Camera = Camera()
    command_timeline: Optional[list[tuple[int, ExternalCommand]]] = None
    disconnect_tick: Optional[int] = None


class BenchConfigError(ValueError):
    pass


def _sample_start(plan: FloorPlan, seed: int) -> Pose:
    rng = np.random.default_rng(seed)
    r = plan.spawn_regions[int(rng.integers(len(plan.spawn_regions)))]
    return Pose(rng.uniform(r[0], r[2]), rng.uniform(r[1], r[3]),
                rng.uniform(-math.pi, math.pi))


def run_trial(spec: TrialSpec, artifacts: BenchArtifacts) -> TrialResult:
    plan = artifacts.plan
    if spec.method is MethodKind.LEARNED and artifacts.params is None:
        raise BenchConfigError("learned trial needs a checkpoint")
    if spec.method is MethodKind.EXTERNAL and artifacts.command_timeline is None:
        raise BenchConfigError("external trial needs a command timeline")

    start = spec.start if spec.start is not None else _sample_start(plan, spec.seed)
    noise = replace(artifacts.noise, seed=spec.seed)
    if spec.method is MethodKind.BEST_STRAIGHT:
        heading = best_straight_heading(
            plan, (start.x, start.y), noise=noise,
            speed=artifacts.policy_cfg.beta)
        start = Pose(start.x, start.y, heading)

    sim = Simulator(plan, noise, start, seed=spec.seed, camera=artifacts.camera)
    pol_state = PolicyState()
    source = CommandSource()
    ext_policy = external_command_policy(source)
    depth_runner = DepthPolicyRunner(artifacts.depth_cfg)
    timeline = list(artifacts.command_timeline or [])

    max_ticks = int(round(spec.max_time / sim.dt))
    window_ticks = int(round(spec.small_loop.window / sim.dt))
    poses = [(start.x, start.y, start.heading)]
    probs_trace = []
    distance = 0.0
    termination = Termination.TIME_CAP
    ticks_run = 0

    for tick in range(max_ticks):
        if spec.method is MethodKind.LEARNED:
            frame = sim.render()
            probs = three_way_probabilities(
                artifacts.params, frame, artifacts.policy_cfg.crop_fraction)
            cmd, pol_state = decide(pol_state, probs, artifacts.policy_cfg)
            probs_trace.append(probs)
        elif spec.method is MethodKind.BEST_STRAIGHT:
            cmd = Command(artifacts.policy_cfg.beta, 0.0)
        elif spec.method is MethodKind.DEPTH_ORACLE:
            scan = raycast(plan, sim.state.pose, artifacts.depth_cfg.scan_fov,
                           artifacts.depth_cfg.scan_rays, 50.0)
            cmd = depth_runner(scan)
        else:
            while timeline and timeline[0][0] <= tick:
                source.put(timeline.pop(0)[1])
            if artifacts.disconnect_tick is not None and tick >= artifacts.disconnect_tick:
                source.disconnect()
                termination = Termination.DISCONNECT
                break
            cmd = ext_policy()

        prev = sim.state.pose
        sim.step(cmd, render_frame=False)
        p = sim.state.pose
        distance += math.hypot(p.x - prev.x, p.y - prev.y)
        poses.append((p.x, p.y, p.heading))
        ticks_run = tick + 1
        if sim.state.collided:
            termination = Termination.COLLISION
            break
        if ticks_run >= window_ticks:
            ref = poses[ticks_run - window_ticks]
            if math.hypot(p.x - ref[0], p.y - ref[1]) < spec.small_loop.min_net_displacement:
                termination = Termination.SMALL_LOOP
                break

    return TrialResult(
        distance_before_collision=distance,
        time_before_collision=ticks_run * sim.dt,
        termination=termination,
        poses=np.array(poses),
        prob_trace=np.array(probs_trace) if probs_trace else None,
    )


@dataclass
class BenchmarkTable:
    runs_per_cell: int
    cells: dict  # (environment, MethodKind) -> {"mean_distance","mean_time","runs":[...]}

    def mean_distance(self, env: str, method: MethodKind) -> float:
        return self.cells[(env, method)]["mean_distance"]


def run_benchmark(
    plans: dict[str, FloorPlan],
    methods: list[MethodKind],
    artifacts_by_plan: dict[str, BenchArtifacts],
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5),
    max_time: float = 300.0,
) -> BenchmarkTable:
    cells = {}
    for env in sorted(plans):
        for method in methods:
            runs = []
            for seed in seeds:
                spec = TrialSpec(plan_name=env, method=method, seed=seed, max_time=max_time)
                result = run_trial(spec, artifacts_by_plan[env])
                runs.append({
                    "seed": seed,
                    "distance": result.distance_before_collision,
                    "time": result.time_before_collision,
                    "termination": result.termination.value,
                })
            cells[(env, method)] = {
                "mean_distance": float(np.mean([r["distance"] for r in runs])),
                "mean_time": float(np.mean([r["time"] for r in runs])),
                "runs": runs,
            }
    return BenchmarkTable(runs_per_cell=len(seeds), cells=cells)


def ordering_report(table: BenchmarkTable) -> dict[str, bool]:
    """Per environment: strict mean-distance ordering learned > depth > straight."""
    envs = sorted({env for env, _ in table.cells})
    out = {}
    for env in envs:
        learned = table.mean_distance(env, MethodKind.LEARNED)
        depth = table.mean_distance(env, MethodKind.DEPTH_ORACLE)
        straight = table.mean_distance(env, MethodKind.BEST_STRAIGHT)
        out[env] = learned > depth > straight
    return out


# Published reference numbers for side-by-side display (avg distance m, avg time s).
PAPER_REFERENCE = {
    "glass_door": {"best_straight": (3.3, 3.0), "depth": (3.1, 5.0),
                   "learned": (27.9, 56.6), "human": (84.0, 145.0)},
    "office_floor": {"best_straight": (6.2, 7.0), "depth": (14.0, 28.3),
                     "learned": (54.0, 120.4), "human": (99.9, 209.0)},
    "entrance_atrium": {"best_straight": (2.7, 3.0), "depth": (13.4, 22.6),
                        "learned": (42.3, 78.4), "human": (119.6, 196.0)},
    "wean": {"best_straight": (4.2, 4.6), "depth": (11.6, 22.1),
             "learned": (22.4, 47.0), "human": (70.6, 126.0)},
    "hallway": {"best_straight": (6.2, 6.6), "depth": (24.9, 26.6),
                "learned": (115.2, 210.0), "human": (95.7, 141.0)},
    "hallway_chairs": {"best_straight": (2.7, 3.1), "depth": (25.5, 43.5),
                       "learned": (86.9, 203.5), "human": (69.3, 121.0)},
}

_METHOD_LABELS = {
    MethodKind.BEST_STRAIGHT: "Best Straight",
    MethodKind.DEPTH_ORACLE: "Depth Oracle",
    MethodKind.LEARNED: "Our Method",
    MethodKind.EXTERNAL: "Human",
}


def table_to_json(table: BenchmarkTable) -> str:
    doc = {
        "format_version": RESULTS_FORMAT_VERSION,
        "runs_per_cell": table.runs_per_cell,
        "cells": [
            {
                "environment": env,
                "method": method.value,
                "mean_distance": cell["mean_distance"],
                "mean_time": cell["mean_time"],
                "runs": cell["runs"],
            }
            for (env, method), cell in sorted(
                table.cells.items(), key=lambda kv: (kv[0][0], kv[0][1].value))
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def table_to_text(table: BenchmarkTable) -> str:
    """Human-readable rendering: one block per environment, a row per method."""
    envs = sorted({env for env, _ in table.cells})
    lines = ["Average distance and average time before collision", ""]
    for env in envs:
        lines.append(env)
        lines.append(f"  {'method':<16} {'avg dist (m)':>12} {'avg time (s)':>12}")
        for method in MethodKind:
            if (env, method) not in table.cells:
                continue
            cell = table.cells[(env, method)]
            lines.append(
                f"  {_METHOD_LABELS[method]:<16} {cell['mean_distance']:>12.1f}"
                f" {cell['mean_time']:>12.1f}"
            )
        lines.append("")
    return "\n".join(lines)
