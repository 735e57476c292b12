"""Turn crash trajectories into a binary dataset: find the collision moment
from the accelerometer, label early ticks safe and pre-impact ticks unsafe."""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .collect import Trajectory
from .world import Frame

DATASET_FORMAT_VERSION = 1
_MAGIC = b"CRASHDST"


class LabelError(ValueError):
    pass


class NoSpikeError(LabelError):
    pass


class Label(enum.Enum):
    POSITIVE = 1   # safe to keep flying forward
    NEGATIVE = 0   # near collision


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"


@dataclass(frozen=True)
class LabelConfig:
    n_plus: int = 30
    n_minus: int = 20
    accel_threshold: float = 4.0
    min_length: int = 4

    def __post_init__(self):
        if self.n_plus < 1 or self.n_minus < 1:
            raise ValueError("n_plus and n_minus must be >= 1")
        if self.accel_threshold <= 0:
            raise ValueError("accel_threshold must be positive")


@dataclass(frozen=True)
class LabeledSample:
    frame: Frame
    label: Label
    source_trajectory_id: str
    source_tick: int


@dataclass
class Dataset:
    samples: list[LabeledSample]
    split: dict[str, Split]  # trajectory id -> split
    class_counts: dict[Label, int]

    def subset(self, split: Split) -> list[LabeledSample]:
        return [s for s in self.samples if self.split[s.source_trajectory_id] is split]


def detect_collision_tick(trajectory: Trajectory, threshold: float) -> int:
    """Index of the first record whose accel magnitude crosses `threshold`."""
    if not trajectory.ended_in_collision:
        raise LabelError("trajectory did not end in a collision")
    for i, rec in enumerate(trajectory.records):
        if rec.accel_magnitude >= threshold:
            return i
    raise NoSpikeError(
        f"no accel spike >= {threshold} in trajectory {trajectory.id}"
    )


def _window_sizes(length: int, n_plus: int, n_minus: int) -> tuple[int, int]:
    """Short-trajectory rule: shrink both windows proportionally, zero gap,
    preserving the n_plus:n_minus ratio as closely as integer counts allow."""
    if length >= n_plus + n_minus:
        return n_plus, n_minus
    p = int(length * n_plus / (n_plus + n_minus))
    m = length - p
    # both classes keep at least one sample when there is room for two
    if p == 0 and length >= 2:
        p, m = 1, length - 1
    if m == 0 and length >= 2:
        p, m = length - 1, 1
    return p, m


def segment(trajectory: Trajectory, cfg: LabelConfig) -> list[LabeledSample]:
    """Label the first n_plus ticks positive and (for crashes) the last n_minus
    ticks before the collision negative; the middle is ignored."""
    if trajectory.ended_in_collision:
        # the detected tick is the end of the usable trajectory; the in-contact
        # record itself and everything after it are discarded
        end = detect_collision_tick(trajectory, cfg.accel_threshold)
        records = trajectory.records[:end]
    else:
        records = trajectory.records
    length = len(records)
    if length < cfg.min_length:
        return []
    out: list[LabeledSample] = []
    if trajectory.ended_in_collision:
        p, m = _window_sizes(length, cfg.n_plus, cfg.n_minus)
        neg_start = length - m
    else:
        p, neg_start = min(cfg.n_plus, length), length
    for i in range(p):
        out.append(LabeledSample(records[i].frame, Label.POSITIVE,
                                 trajectory.id, records[i].tick))
    for i in range(neg_start, length):
        out.append(LabeledSample(records[i].frame, Label.NEGATIVE,
                                 trajectory.id, records[i].tick))
    return out


def build_dataset(
    trajectories: Iterable[Trajectory],
    cfg: LabelConfig,
    val_fraction: float = 0.2,
    seed: int = 0,
    tallies: Optional[dict] = None,
) -> Dataset:
    """Detect + segment every trajectory, then split by trajectory id."""
    trajectories = sorted(trajectories, key=lambda t: t.id)
    if len(trajectories) < 2:
        raise LabelError("need at least two trajectories to build a dataset")
    t = tallies if tallies is not None else {}
    t.setdefault("skipped_short", 0)
    samples: list[LabeledSample] = []
    kept_ids: list[str] = []
    for traj in trajectories:
        got = segment(traj, cfg)
        if not got:
            t["skipped_short"] += 1
            continue
        samples.extend(got)
        kept_ids.append(traj.id)

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(kept_ids))
    n_val = int(round(val_fraction * len(kept_ids)))
    val_ids = {kept_ids[i] for i in order[:n_val]}
    split = {tid: (Split.VAL if tid in val_ids else Split.TRAIN) for tid in kept_ids}

    counts = {Label.POSITIVE: 0, Label.NEGATIVE: 0}
    for s in samples:
        counts[s.label] += 1
    if counts[Label.POSITIVE] == 0 or counts[Label.NEGATIVE] == 0:
        raise LabelError("degenerate dataset: one label class is empty")
    return Dataset(samples=samples, split=split, class_counts=counts)


# ---------------------------------------------------------------------------
# Dataset file: magic, u32 version, u32 header length, JSON header
# {"kind": "dataset", "frame_width", "frame_height",
#  "samples": [{"trajectory_id", "tick", "label"}...],
#  "split": {trajectory_id: "train"|"val"}}
# followed by u8[n, h, w] frame planes in sample order.
# ---------------------------------------------------------------------------

def write_dataset(ds: Dataset, path) -> None:
    if not ds.samples:
        raise LabelError("refusing to write an empty dataset")
    h = ds.samples[0].frame.height
    w = ds.samples[0].frame.width
    header = {
        "kind": "dataset",
        "frame_width": w,
        "frame_height": h,
        "samples": [
            {"trajectory_id": s.source_trajectory_id, "tick": s.source_tick,
             "label": s.label.value}
            for s in ds.samples
        ],
        "split": {tid: sp.value for tid, sp in ds.split.items()},
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", DATASET_FORMAT_VERSION, len(blob)))
        f.write(blob)
        frames = np.stack([s.frame.to_u8() for s in ds.samples])
        f.write(frames.tobytes())


def read_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        if f.read(8) != _MAGIC:
            raise LabelError("not a crashnav dataset file")
        version, hlen = struct.unpack("<II", f.read(8))
        if version != DATASET_FORMAT_VERSION:
            raise LabelError(f"unsupported dataset format_version {version}")
        header = json.loads(f.read(hlen).decode("utf-8"))
        w, h = header["frame_width"], header["frame_height"]
        metas = header["samples"]
        raw = f.read(len(metas) * h * w)
        if len(raw) != len(metas) * h * w:
            raise LabelError("truncated dataset file")
        frames = np.frombuffer(raw, dtype=np.uint8).reshape(len(metas), h, w)
    samples = [
        LabeledSample(Frame.from_u8(frames[i]), Label(m["label"]),
                      m["trajectory_id"], m["tick"])
        for i, m in enumerate(metas)
    ]
    split = {tid: Split(v) for tid, v in header["split"].items()}
    counts = {Label.POSITIVE: 0, Label.NEGATIVE: 0}
    for s in samples:
        counts[s.label] += 1
    return Dataset(samples=samples, split=split, class_counts=counts)
