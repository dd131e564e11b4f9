"""Control-ownership state machine.

Each frame either the ADS trajectory is dispatched to the vehicle
controller or it is suppressed and the mitigator is activated.  Takeover
fires when enough recent frames flagged a collision or signal hazard, or
when every recent frame flagged stalling; control returns only after a
full recovery window of hazard-free frames has been observed.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass

from .monitor import BufferBank, MonitorConfig

OWNER_ADS = "ADS"
OWNER_MITIGATOR = "MITIGATOR"

CAUSE_COLLISION = "collision"
CAUSE_SIGNAL = "signal"
CAUSE_STALL = "stall"


@dataclass(frozen=True)
class ControlOwner:
    """Who drives, since when, and why (when the mitigator does)."""

    owner: str = OWNER_ADS
    since_frame: int = 0
    takeover_cause: str | None = None

    def __post_init__(self):
        if self.owner == OWNER_MITIGATOR and self.takeover_cause is None:
            raise ValueError("mitigator ownership requires a takeover cause")


@dataclass(frozen=True)
class GateDecision:
    """Exactly one of dispatch/activate holds each frame."""

    dispatch_ads_trajectory: bool
    activate_mitigator: bool
    control_returned: bool = False

    def __post_init__(self):
        if self.dispatch_ads_trajectory == self.activate_mitigator:
            raise ValueError("dispatch and activate are mutually exclusive")


def decide(bank: BufferBank, state: ControlOwner,
           cfg: MonitorConfig) -> tuple[GateDecision, ControlOwner]:
    """One gate decision against the current buffer contents.

    Under ADS control: take over when the collision or signal queue holds
    at least ``trigger_threshold`` ones, or the stall queue is full of
    ones.  Cause priority when several fire at once: collision > signal >
    stall.  Taking over resets the recovery queue, so return requires a
    full window of fresh zeros.  Under mitigator control: return only when
    the recovery queue holds a complete window of recorded zeros.
    """
    frame = bank.last_frame if bank.last_frame is not None else state.since_frame
    if state.owner == OWNER_ADS:
        cause = None
        if bank.collision.ones() >= cfg.trigger_threshold:
            cause = CAUSE_COLLISION
        elif bank.signal.ones() >= cfg.trigger_threshold:
            cause = CAUSE_SIGNAL
        elif bank.stall.full() and bank.stall.all_ones():
            cause = CAUSE_STALL
        if cause is None:
            return GateDecision(True, False), state
        bank.recovery.reset()
        new_state = ControlOwner(OWNER_MITIGATOR, frame, cause)
        return GateDecision(False, True), new_state

    if bank.recovery.full() and bank.recovery.all_zero():
        new_state = ControlOwner(OWNER_ADS, frame, None)
        return GateDecision(True, False, control_returned=True), new_state
    return GateDecision(False, True), state


def gate_latency_probe(cfg: MonitorConfig | None = None,
                       iterations: int = 1000) -> float:
    """Median wall time of one decide() call, in seconds.

    Runs against a throwaway bank/state copy so probing never perturbs a
    live gate.
    """
    cfg = cfg or MonitorConfig()
    bank = BufferBank(cfg)
    for i in range(cfg.stall_window):
        bank.collision.write(i, i % 2)
        bank.signal.write(i, 0)
        bank.stall.write(i, 0)
    state = ControlOwner()
    samples = []
    for _ in range(iterations):
        b = copy.deepcopy(bank)
        s = state
        t0 = time.perf_counter()
        decide(b, s, cfg)
        samples.append(time.perf_counter() - t0)
    samples.sort()
    return samples[len(samples) // 2]
