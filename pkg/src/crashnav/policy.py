"""Crop-based three-way inference and the forward / arc-turn control law.

The classifier scores "is it safe to keep flying straight" on the left crop,
the full frame and the right crop; high confidence on a side crop argues for
turning toward that side.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .learn import NetworkParams, forward_frames
from .vehicle import Command, Simulator, V_MAX
from .world import Frame, Pose


@dataclass(frozen=True)
class PolicyConfig:
    alpha: float = 0.5          # go-straight probability threshold
    beta: float = 0.6           # m/s cruise speed while going forward
    k_yaw: float = 0.05         # rad/s per unit (p_left - p_right); kept small
                                # so dead-end turnarounds exit on a diagonal
                                # instead of being steered back into a retrace
    turn_rate: float = 0.9      # rad/s yaw rate while in a turn
    crop_fraction: float = 0.5  # of image width, each side crop
    max_turn_ticks: int = 120   # anti-deadlock cap on a turn loop
    turn_speed: float = 0.175   # m/s forward speed while turning; the resulting
                                # arc displaces the vehicle sideways during a
                                # dead-end reversal instead of retracing in place

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not 0.0 < self.beta <= V_MAX:
            raise ValueError("beta must be in (0, v_max]")
        if not 0.0 < self.crop_fraction <= 1.0:
            raise ValueError("crop_fraction must be in (0, 1]")
        if not 0.0 <= self.turn_speed <= V_MAX:
            raise ValueError("turn_speed must be in [0, v_max]")


class Mode(enum.Enum):
    FORWARD = "forward"
    TURNING_LEFT = "turning_left"
    TURNING_RIGHT = "turning_right"


@dataclass(frozen=True)
class PolicyState:
    mode: Mode = Mode.FORWARD
    ticks_in_turn: int = 0


@dataclass(frozen=True)
class Telemetry:
    tick: int
    pose: Pose
    p_left: float
    p_straight: float
    p_right: float
    mode: Mode
    command: Command
    collided: bool


def three_way_probabilities(
    params: NetworkParams, frame: Frame, crop_fraction: float
) -> tuple[float, float, float]:
    """(p_left, p_straight, p_right) from the side crops and the full frame."""
    w = frame.width
    cw = max(1, round(crop_fraction * w))
    left = frame.pixels[:, :cw]
    right = frame.pixels[:, w - cw:]
    p = forward_frames(params, [left, frame.pixels, right])
    return float(p[0]), float(p[1]), float(p[2])


def decide(
    state: PolicyState,
    probs: tuple[float, float, float],
    cfg: PolicyConfig,
) -> tuple[Command, PolicyState]:
    """Pure decision step. Positive angular velocity turns left (CCW), so the
    turn toward the side with higher safe-probability is k_yaw*(p_left - p_right)
    in world yaw; the control law magnitude follows |p_right - p_left|."""
    p_left, p_straight, p_right = probs

    if state.mode is Mode.FORWARD:
        if p_straight > cfg.alpha:
            yaw = cfg.k_yaw * (p_left - p_right)
            return Command(cfg.beta, yaw), PolicyState(Mode.FORWARD, 0)
        if p_right > p_left:
            return Command(cfg.turn_speed, -cfg.turn_rate), PolicyState(Mode.TURNING_RIGHT, 1)
        # ties turn left (documented tie-break)
        return Command(cfg.turn_speed, cfg.turn_rate), PolicyState(Mode.TURNING_LEFT, 1)

    # in a turn loop: keep the direction until the straight view clears alpha
    if p_straight > cfg.alpha or state.ticks_in_turn >= cfg.max_turn_ticks:
        # forced exit after max_turn_ticks perturbs the view (anti-deadlock)
        yaw = cfg.k_yaw * (p_left - p_right) if p_straight > cfg.alpha else 0.0
        return Command(cfg.beta, yaw), PolicyState(Mode.FORWARD, 0)
    sign = -1.0 if state.mode is Mode.TURNING_RIGHT else 1.0
    return Command(cfg.turn_speed, sign * cfg.turn_rate), PolicyState(
        state.mode, state.ticks_in_turn + 1
    )


def run_policy_tick(
    sim: Simulator,
    params: NetworkParams,
    state: PolicyState,
    cfg: PolicyConfig,
    probs_fn=three_way_probabilities,
) -> tuple[Command, PolicyState, Telemetry]:
    """Render, infer, decide, step; collisions are reported in the telemetry."""
    frame = sim.render()
    probs = probs_fn(params, frame, cfg.crop_fraction)
    cmd, new_state = decide(state, probs, cfg)
    sim.step(cmd, render_frame=False)
    telemetry = Telemetry(
        tick=sim.tick,
        pose=sim.state.pose,
        p_left=probs[0],
        p_straight=probs[1],
        p_right=probs[2],
        mode=new_state.mode,
        command=cmd,
        collided=sim.state.collided,
    )
    return cmd, new_state, telemetry


def learned_policy_fn(params: NetworkParams, cfg: Optional[PolicyConfig] = None):
    """Wrap the stateful policy as a plain Frame -> Command function (used by
    hard-negative recollection)."""
    cfg = cfg or PolicyConfig()
    state = PolicyState()

    def policy(frame: Frame) -> Command:
        nonlocal state
        probs = three_way_probabilities(params, frame, cfg.crop_fraction)
        cmd, state = decide(state, probs, cfg)
        return cmd

    return policy
