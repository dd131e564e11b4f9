"""Hazard evaluation over predicted box sets and the buffer bank feeding
the takeover gate.

Three hazards are tracked per frame: a predicted collision that is not
receding, a predicted stop-signal transit without a complete stop, and a
near-stop outside any signal influence region.  Binary outcomes land in
fixed-length circular queues; a fourth queue records hazard-free progress
while control is taken over.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .prediction import PredictedBoxSet, STOP_SIGNAL_KIND
from .world import BevSnapshot, sat_intersects


@dataclass(frozen=True)
class MonitorConfig:
    """Buffer sizes, trigger threshold, horizon, and footprint caps.

    Defaults are the calibrated operating point: 5-deep collision/signal
    windows with a trigger at 4 hits, a 20-frame stall window and a
    20-frame recovery window, a 60-frame prediction horizon, and growth
    caps of 130% (ego) / 200% (vehicles) / 150% (pedestrians).
    """

    collision_window: int = 5
    stall_window: int = 20
    recovery_window: int = 20
    trigger_threshold: int = 4
    horizon: int = 60
    stop_speed: float = 0.1
    cap_ego: float = 1.3
    cap_vehicle: float = 2.0
    cap_pedestrian: float = 1.5

    def __post_init__(self):
        if self.collision_window < 1 or self.stall_window < 1 or self.recovery_window < 1:
            raise ValueError("buffer windows must be >= 1")
        if not (1 <= self.trigger_threshold <= self.collision_window):
            raise ValueError(
                f"trigger_threshold must be in [1, {self.collision_window}], "
                f"got {self.trigger_threshold}"
            )
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.stop_speed <= 0:
            raise ValueError("stop_speed must be > 0")
        for cap in (self.cap_ego, self.cap_vehicle, self.cap_pedestrian):
            if cap < 1.0:
                raise ValueError("enlargement caps must be >= 1")


class SequencingError(RuntimeError):
    """Raised when buffer updates arrive out of frame order."""


class BinaryRing:
    """Fixed-length circular queue of 0/1 entries, initially empty."""

    __slots__ = ("slots",)

    def __init__(self, size: int):
        self.slots: list[int | None] = [None] * size

    def __len__(self) -> int:
        return len(self.slots)

    def write(self, frame: int, value: int) -> int:
        v = 1 if value else 0
        self.slots[frame % len(self.slots)] = v
        return v

    def ones(self) -> int:
        return sum(1 for s in self.slots if s == 1)

    def full(self) -> bool:
        return all(s is not None for s in self.slots)

    def all_ones(self) -> bool:
        return all(s == 1 for s in self.slots)

    def all_zero(self) -> bool:
        return all(s == 0 for s in self.slots)

    def reset(self) -> None:
        for i in range(len(self.slots)):
            self.slots[i] = None

    def snapshot(self) -> list[int | None]:
        return list(self.slots)


@dataclass
class BufferBank:
    """The three takeover queues plus the recovery queue.

    Single-writer: only the monitor mutates the queues (the gate resets
    the recovery queue on takeover).  ``prev_collision_frame`` carries the
    previous frame's minimum predicted collision frame for the
    is-it-receding comparison.
    """

    config: MonitorConfig
    collision: BinaryRing = field(init=False)
    signal: BinaryRing = field(init=False)
    stall: BinaryRing = field(init=False)
    recovery: BinaryRing = field(init=False)
    prev_collision_frame: int | None = None
    last_frame: int | None = None

    def __post_init__(self):
        self.collision = BinaryRing(self.config.collision_window)
        self.signal = BinaryRing(self.config.collision_window)
        self.stall = BinaryRing(self.config.stall_window)
        self.recovery = BinaryRing(self.config.recovery_window)


@dataclass(frozen=True)
class HazardReport:
    """Per-frame hazard evaluation outcome."""

    frame: int
    min_collision_frame: int | None
    collision_flag: bool
    sigvio_flag: bool
    stalling_flag: bool
    colliding_actors: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.collision_flag and self.min_collision_frame is None:
            raise ValueError("collision_flag requires min_collision_frame")

    def any_hazard(self) -> bool:
        return self.collision_flag or self.sigvio_flag or self.stalling_flag


def _participant_hits(boxes: PredictedBoxSet):
    """First-hit offsets for every non-signal participant.

    Returns (ids, offsets) where offsets[i] is the first frame offset at
    which participant ids[i] overlaps the ego, -1 for never.
    """
    if not boxes.actors.shape[0]:
        return [], np.empty(0, dtype=np.int64)
    mask = np.array([k != STOP_SIGNAL_KIND for k in boxes.actor_kinds])
    if not mask.any():
        return [], np.empty(0, dtype=np.int64)
    ids = [aid for aid, m in zip(boxes.actor_ids, mask) if m]
    hits = kernels.first_hit_offsets(boxes.ego, boxes.actors[mask])
    return ids, hits


def min_collision_frame(boxes: PredictedBoxSet) -> int | None:
    """Smallest absolute frame at which any non-ego participant's predicted
    box overlaps the ego's predicted box.

    Stop-signal regions are excluded here; they feed the signal check, not
    the collision check.  Returns None when nothing intersects over the
    horizon.
    """
    _, hits = _participant_hits(boxes)
    valid = hits[hits >= 0]
    if valid.size:
        return boxes.horizon_start + int(valid.min())
    return None


def colliding_actor_ids(boxes: PredictedBoxSet) -> frozenset[str]:
    """Ids of participants predicted to intersect the ego within the horizon."""
    ids, hits = _participant_hits(boxes)
    return frozenset(aid for aid, h in zip(ids, hits) if h >= 0)


def _predicted_signal_violation(boxes: PredictedBoxSet, stop_speed: float) -> bool:
    """Whether some active signal region is predicted to be transited
    without the ego's speed ever dropping to a complete stop.

    The quantifier runs over the predicted overlap frames only; no overlap
    within the horizon means no violation.
    """
    speeds = boxes.ego_speeds()
    for idx, kind in enumerate(boxes.actor_kinds):
        if kind != STOP_SIGNAL_KIND:
            continue
        mask = kernels.overlap_mask(boxes.ego, boxes.actors[idx, 0])
        overlap = mask.astype(bool)
        if overlap.any() and bool(np.all(speeds[overlap] > stop_speed)):
            return True
    return False


def _valid_stop_now(snapshot: BevSnapshot) -> bool:
    """Whether the ego currently overlaps any active influence region."""
    ego_box = snapshot.ego.box
    for _, region in snapshot.active_regions():
        if sat_intersects(ego_box, region):
            return True
    return False


def evaluate(boxes: PredictedBoxSet, snapshot: BevSnapshot, bank: BufferBank,
             cfg: MonitorConfig) -> HazardReport:
    """Evaluate the three hazards for one frame and roll the collision
    comparison state forward.

    A predicted collision raises the flag when it is first seen or when
    its frame is not receding relative to the previous evaluation.
    """
    ids, hits = _participant_hits(boxes)
    valid = hits[hits >= 0]
    cmin = boxes.horizon_start + int(valid.min()) if valid.size else None
    prev = bank.prev_collision_frame
    collision_flag = cmin is not None and (prev is None or cmin <= prev)
    bank.prev_collision_frame = cmin

    sigvio = _predicted_signal_violation(boxes, cfg.stop_speed)

    ego_speed = snapshot.ego.box.speed
    stalling = ego_speed < cfg.stop_speed and not _valid_stop_now(snapshot)

    return HazardReport(
        frame=snapshot.frame,
        min_collision_frame=cmin,
        collision_flag=collision_flag,
        sigvio_flag=sigvio,
        stalling_flag=stalling,
        colliding_actors=frozenset(a for a, h in zip(ids, hits) if h >= 0),
    )


def update_buffers(report: HazardReport, bank: BufferBank, in_takeover: bool,
                   cfg: MonitorConfig) -> BufferBank:
    """Write one frame's flags into the queues.

    Exactly one slot per queue is touched.  While control is taken over,
    the recovery queue records the OR of the three freshly written
    entries.  Frames must arrive in strictly increasing order.
    """
    if bank.last_frame is not None and report.frame <= bank.last_frame:
        raise SequencingError(
            f"buffer update for frame {report.frame} after frame {bank.last_frame}"
        )
    c = bank.collision.write(report.frame, report.collision_flag)
    s = bank.signal.write(report.frame, report.sigvio_flag)
    st = bank.stall.write(report.frame, report.stalling_flag)
    if in_takeover:
        bank.recovery.write(report.frame, c or s or st)
    bank.last_frame = report.frame
    return bank


# ---------------------------------------------------------------------------
# Takeover-accuracy scoring


@dataclass(frozen=True)
class TakeoverScore:
    precision: float
    recall: float
    f3: float
    tp: int
    fp: int
    fn: int


def f_beta(precision: float, recall: float, beta: float = 3.0) -> float:
    denom = beta * beta * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + beta * beta) * precision * recall / denom


def score_takeovers(takeover_times, violation_times,
                    window: float = 3.0) -> TakeoverScore:
    """Precision/recall/F3 of takeover decisions against violation times.

    A takeover within ``window`` seconds before a violation is a necessary
    intervention (true positive); other takeovers are false positives;
    violations with no takeover in the preceding window are false
    negatives.  Zero-denominator conventions: precision is 1.0 with no
    takeovers, recall is 1.0 with no violations.
    """
    takeovers = sorted(float(t) for t in takeover_times)
    violations = sorted(float(t) for t in violation_times)
    tp = 0
    fp = 0
    for t in takeovers:
        if any(v - window <= t <= v for v in violations):
            tp += 1
        else:
            fp += 1
    fn = sum(1 for v in violations if not any(v - window <= t <= v for t in takeovers))
    precision = tp / (tp + fp) if (tp + fp) > 0 else 1.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 1.0
    return TakeoverScore(precision, recall, f_beta(precision, recall), tp, fp, fn)
