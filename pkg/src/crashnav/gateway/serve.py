"""Websocket session host: streams monocular frames, routes external commands
in human mode, overlays policy telemetry in spectate mode.

A human-mode session discloses exactly what a pilot would see: the rendered
frame plus a speed/elapsed/distance HUD.  Every outbound message is audited
against the forbidden-field list before it leaves the process.
"""

from __future__ import annotations

import asyncio
import enum
import itertools
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from ..baselines import CommandSource, DepthPolicyConfig, ExternalCommand, external_command_policy
from ..bench import RESULTS_FORMAT_VERSION, SmallLoopSpec, Termination, _sample_start
from ..learn import NetworkParams
from ..policy import PolicyConfig, PolicyState, decide, three_way_probabilities
from ..vehicle import NoiseModel, Simulator
from ..world import Camera, FloorPlan
from .wire import (
    CommandMsg,
    ControlMsg,
    FrameMsg,
    ServerHello,
    TrialEnded,
    WIRE_FORMAT_VERSION,
    audit_human_payload,
    encode_frame,
    encode_message,
    decode_message,
)

DATA_DIR_ENV = "CRASHNAV_DATA_DIR"


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


class SessionMode(enum.Enum):
    HUMAN_TRIAL = "human"
    PRACTICE = "practice"
    SPECTATE = "spectate"


@dataclass
class SessionConfig:
    max_time: float = 300.0
    small_loop: SmallLoopSpec = field(default_factory=SmallLoopSpec)
    tick_interval: float = 0.1   # wall-clock pacing; 0 runs flat out (tests)
    noise: NoiseModel = field(default_factory=NoiseModel)
    camera: Camera = field(default_factory=Camera)


@dataclass
class TrialRecord:
    """What a finished live trial leaves behind (loopback audits read this)."""
    plan_name: str
    mode: SessionMode
    seed: int
    timeline: list                   # [(tick, ExternalCommand)] as consumed
    distance: float
    time: float
    termination: Termination
    recorded: bool


class SessionHost:
    """One live simulation loop per started session; clients are isolated."""

    def __init__(
        self,
        plans: dict[str, FloorPlan],
        params: Optional[NetworkParams] = None,
        policy_cfg: PolicyConfig = PolicyConfig(),
        results_dir: Optional[Path] = None,
        cfg: SessionConfig = SessionConfig(),
        seed: int = 0,
    ):
        self.plans = plans
        self.params = params
        self.policy_cfg = policy_cfg
        self.results_dir = Path(results_dir) if results_dir is not None else None
        self.cfg = cfg
        self.seed = seed
        self.trials: list[TrialRecord] = []
        self._ids = itertools.count()

    async def handler(self, websocket):
        session_id = f"s{next(self._ids)}"
        hello = ServerHello(
            session_id=session_id,
            format_version=WIRE_FORMAT_VERSION,
            camera_width=self.cfg.camera.width,
            camera_height=self.cfg.camera.height,
            tick_rate=1.0 / 0.1,
        )
        await websocket.send(encode_message(hello))
        inbox: asyncio.Queue = asyncio.Queue()

        async def pump():
            try:
                async for text in websocket:
                    inbox.put_nowait(decode_message(text))
            except Exception:
                pass
            inbox.put_nowait(None)   # sentinel: client gone

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                msg = await inbox.get()
                if msg is None:
                    break
                if isinstance(msg, ControlMsg) and msg.action == "start":
                    plan_name = msg.plan or next(iter(self.plans))
                    if plan_name not in self.plans:
                        continue
                    mode = SessionMode(msg.mode or "human")
                    if mode is SessionMode.HUMAN_TRIAL and msg.practice:
                        mode = SessionMode.PRACTICE
                    if mode is SessionMode.SPECTATE:
                        await self._run_spectate(websocket, session_id, plan_name, inbox)
                    else:
                        await self._run_human(websocket, session_id, plan_name, mode, inbox)
                elif isinstance(msg, ControlMsg) and msg.action == "end":
                    break
        finally:
            pump_task.cancel()

    async def _send(self, websocket, msg, human: bool):
        text = encode_message(msg)
        if human:
            audit_human_payload(text)
        await websocket.send(text)

    async def _run_human(self, websocket, session_id, plan_name, mode, inbox):
        plan = self.plans[plan_name]
        seed = self.seed
        noise = replace(self.cfg.noise, seed=seed)
        start = _sample_start(plan, seed)
        sim = Simulator(plan, noise, start, seed=seed, camera=self.cfg.camera)
        source = CommandSource()
        policy = external_command_policy(source)
        timeline: list[tuple[int, ExternalCommand]] = []

        max_ticks = int(round(self.cfg.max_time / sim.dt))
        window_ticks = int(round(self.cfg.small_loop.window / sim.dt))
        poses = [(start.x, start.y)]
        distance = 0.0
        termination = Termination.TIME_CAP
        ticks_run = 0
        client_gone = False

        for tick in range(max_ticks):
            ended = False
            while not inbox.empty():
                msg = inbox.get_nowait()
                if msg is None:
                    client_gone = True
                elif isinstance(msg, CommandMsg):
                    ec = ExternalCommand(msg.linear_axis, msg.angular_axis,
                                         msg.client_timestamp)
                    source.put(ec)
                    timeline.append((tick, ec))
                elif isinstance(msg, ControlMsg) and msg.action == "end":
                    ended = True
            if client_gone:
                source.disconnect()
                termination = Termination.DISCONNECT
                break
            if ended:
                break

            frame = sim.render()
            hud = {"speed": sim.state.linear_velocity,
                   "elapsed": tick * sim.dt, "distance": distance}
            await self._send(
                websocket,
                FrameMsg(session_id=session_id, tick=tick,
                         frame=encode_frame(frame), hud=hud),
                human=True,
            )

            cmd = policy()
            prev = sim.state.pose
            sim.step(cmd, render_frame=False)
            p = sim.state.pose
            distance += math.hypot(p.x - prev.x, p.y - prev.y)
            poses.append((p.x, p.y))
            ticks_run = tick + 1
            if sim.state.collided:
                termination = Termination.COLLISION
                break
            if ticks_run >= window_ticks:
                ref = poses[ticks_run - window_ticks]
                if math.hypot(p.x - ref[0], p.y - ref[1]) < self.cfg.small_loop.min_net_displacement:
                    termination = Termination.SMALL_LOOP
                    break
            # Always yield so the reader task can drain the socket.
            await asyncio.sleep(self.cfg.tick_interval)

        recorded = mode is SessionMode.HUMAN_TRIAL
        record = TrialRecord(
            plan_name=plan_name, mode=mode, seed=seed, timeline=timeline,
            distance=distance, time=ticks_run * sim.dt,
            termination=termination, recorded=recorded,
        )
        self.trials.append(record)
        if recorded and self.results_dir is not None:
            self._write_result(record)
        if not client_gone:
            await self._send(
                websocket,
                TrialEnded(session_id=session_id, distance=distance,
                           time=ticks_run * sim.dt,
                           termination=termination.value, recorded=recorded),
                human=True,
            )

    async def _run_spectate(self, websocket, session_id, plan_name, inbox):
        if self.params is None:
            return
        plan = self.plans[plan_name]
        seed = self.seed
        noise = replace(self.cfg.noise, seed=seed)
        start = _sample_start(plan, seed)
        sim = Simulator(plan, noise, start, seed=seed, camera=self.cfg.camera)
        state = PolicyState()
        max_ticks = int(round(self.cfg.max_time / sim.dt))
        distance = 0.0

        for tick in range(max_ticks):
            while not inbox.empty():
                msg = inbox.get_nowait()
                if msg is None:
                    return
                if isinstance(msg, ControlMsg) and msg.action == "end":
                    return
                # CommandMsg in spectate mode is ignored: read-only stream.

            frame = sim.render()
            probs = three_way_probabilities(self.params, frame,
                                            self.policy_cfg.crop_fraction)
            cmd, state = decide(state, probs, self.policy_cfg)
            hud = {"speed": sim.state.linear_velocity,
                   "elapsed": tick * sim.dt, "distance": distance}
            await websocket.send(encode_message(FrameMsg(
                session_id=session_id, tick=tick, frame=encode_frame(frame),
                hud=hud, probs=probs, mode=state.mode.name,
            )))

            prev = sim.state.pose
            sim.step(cmd, render_frame=False)
            p = sim.state.pose
            distance += math.hypot(p.x - prev.x, p.y - prev.y)
            if sim.state.collided:
                sim.reset(_sample_start(plan, seed + tick + 1))
                state = PolicyState()
            # Always yield so the reader task can drain the socket.
            await asyncio.sleep(self.cfg.tick_interval)

    def _write_result(self, record: TrialRecord) -> None:
        self.results_dir.mkdir(parents=True, exist_ok=True)
        path = self.results_dir / f"human_{record.plan_name}_{len(self.trials)}.json"
        path.write_text(json.dumps({
            "format_version": RESULTS_FORMAT_VERSION,
            "method": "human",
            "environment": record.plan_name,
            "seed": record.seed,
            "distance": record.distance,
            "time": record.time,
            "termination": record.termination.value,
        }, indent=2, sort_keys=True))


async def serve(host: SessionHost, port: int, bind: str = "127.0.0.1"):
    """Run the websocket server until cancelled."""
    import websockets

    async with websockets.serve(host.handler, bind, port):
        await asyncio.Future()
