"""Wire protocol for live sessions: JSON-encoded messages over a websocket.

Frame payloads are base64 of raw 8-bit grayscale planes (row-major,
width*height bytes), as announced in ServerHello.frame_encoding.  Human-trial
sessions must never carry pose or map information; see audit_human_payload.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..world import Frame

WIRE_FORMAT_VERSION = 1
FRAME_ENCODING = "raw-u8-base64"

# Keys that would leak privileged simulator state to a human pilot.
_FORBIDDEN_HUMAN_KEYS = frozenset(
    {"pose", "poses", "map", "plan", "segments", "x", "y", "heading", "position"}
)


class WireError(ValueError):
    pass


@dataclass(frozen=True)
class ServerHello:
    session_id: str
    format_version: int
    camera_width: int
    camera_height: int
    tick_rate: float
    frame_encoding: str = FRAME_ENCODING


@dataclass(frozen=True)
class FrameMsg:
    session_id: str
    tick: int
    frame: str                       # base64 payload
    hud: dict = field(default_factory=dict)   # speed, elapsed, distance
    probs: Optional[tuple] = None    # (p_left, p_straight, p_right), spectate only
    mode: Optional[str] = None       # policy mode badge, spectate only


@dataclass(frozen=True)
class CommandMsg:
    session_id: str
    linear_axis: float
    angular_axis: float
    client_timestamp: float


@dataclass(frozen=True)
class ControlMsg:
    session_id: str
    action: str                      # "start" | "reset" | "end"
    plan: Optional[str] = None
    mode: Optional[str] = None       # "human" | "practice" | "spectate"
    practice: bool = False


@dataclass(frozen=True)
class TrialEnded:
    session_id: str
    distance: float
    time: float
    termination: str
    recorded: bool


_TYPES = {
    "server_hello": ServerHello,
    "frame": FrameMsg,
    "command": CommandMsg,
    "control": ControlMsg,
    "trial_ended": TrialEnded,
}
_NAMES = {cls: name for name, cls in _TYPES.items()}


def encode_message(msg) -> str:
    name = _NAMES.get(type(msg))
    if name is None:
        raise WireError(f"not a wire message: {type(msg).__name__}")
    doc = asdict(msg)
    doc["type"] = name
    if isinstance(doc.get("probs"), tuple):
        doc["probs"] = list(doc["probs"])
    return json.dumps(doc)


def decode_message(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WireError(f"bad message: {exc}") from exc
    if not isinstance(doc, dict) or "type" not in doc:
        raise WireError("message missing type discriminator")
    cls = _TYPES.get(doc.pop("type"))
    if cls is None:
        raise WireError("unknown message type")
    if "probs" in doc and doc["probs"] is not None:
        doc["probs"] = tuple(doc["probs"])
    try:
        return cls(**doc)
    except TypeError as exc:
        raise WireError(f"bad fields for {cls.__name__}: {exc}") from exc


def encode_frame(frame: Frame) -> str:
    return base64.b64encode(frame.to_u8().tobytes()).decode("ascii")


def decode_frame(payload: str, width: int, height: int) -> Frame:
    raw = base64.b64decode(payload.encode("ascii"))
    if len(raw) != width * height:
        raise WireError(f"frame payload is {len(raw)} bytes, want {width * height}")
    u8 = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return Frame.from_u8(u8)


def audit_human_payload(text: str) -> None:
    """Raise WireError if a serialized message leaks pose/map data.

    Applied to every outbound message of a human-mode session; recursion
    covers nested dicts such as the HUD block.
    """
    doc = json.loads(text)

    def walk(node):
        if isinstance(node, dict):
            for key, value in node.items():
                if key in _FORBIDDEN_HUMAN_KEYS:
                    raise WireError(f"human-mode message leaks field {key!r}")
                walk(value)
        elif isinstance(node, list):
            for item in node:
                walk(item)

    walk(doc)
