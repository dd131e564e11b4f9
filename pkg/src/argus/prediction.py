"""Short-horizon motion prediction over BEV snapshots.

Vehicles (ego included) are rolled forward with a kinematic bicycle model
under controls held fixed for the horizon; pedestrians move at constant
velocity along their current heading; static obstacles are repeated; the
influence regions of active stop signals are repeated as virtual static
boxes.  Predicted vehicle footprints grow linearly over the horizon to
absorb accumulated model error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import OrientedBox, Pose2, normalize_angle
from .world import (
    BevSnapshot,
    PEDESTRIAN,
    STATIC_OBSTACLE,
    VEHICLE,
    signal_region,
)

# Physical clamps for estimated controls.
MAX_STEER = math.pi / 3.0
MAX_ACCEL = 20.0
# Below this speed the heading-rate relation degenerates; assume straight.
MIN_SPEED_FOR_STEER = 0.5

SOURCE_ADS = "ADS"
SOURCE_MITIGATOR = "MITIGATOR"

STOP_SIGNAL_KIND = "stop-signal"

# Default footprint growth caps at the end of the horizon.
CAP_EGO = 1.3
CAP_VEHICLE = 2.0
CAP_PEDESTRIAN = 1.5


@dataclass(frozen=True)
class KbmState:
    """Bicycle-model state; speed is clamped at zero (no reverse)."""

    x: float
    y: float
    theta: float
    v: float


@dataclass(frozen=True)
class ControlEstimate:
    """Per-actor acceleration and front-wheel steering angle."""

    accel: float
    steer: float


@dataclass(frozen=True)
class Trajectory:
    """Short-horizon plan: ordered waypoints plus a desired speed.

    ``plan_dt`` is the time step the desired-speed change is expressed
    over; the controller realizes the speed intent at rate
    (desired - current) / plan_dt, clamped to the vehicle limits.
    """

    waypoints: tuple[tuple[float, float], ...]
    desired_speed: float
    source: str = SOURCE_ADS
    plan_dt: float = 0.5

    def __post_init__(self):
        if self.desired_speed < 0:
            raise ValueError("desired_speed must be >= 0")
        if self.plan_dt <= 0:
            raise ValueError("plan_dt must be > 0")
        for i in range(1, len(self.waypoints)):
            if self.waypoints[i] == self.waypoints[i - 1]:
                raise ValueError("consecutive waypoints must be distinct")


class InvalidTrajectoryError(ValueError):
    """Raised when a trajectory is too short to derive controls from."""


def kbm_step(s: KbmState, c: ControlEstimate, wheelbase: float, dt: float) -> KbmState:
    """One forward-Euler step of the bicycle model.

    Position advances along the old heading, the heading rate is
    v * tan(steer) / wheelbase, and speed is clamped at zero.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if wheelbase <= 0:
        raise ValueError("wheelbase must be > 0")
    x = s.x + s.v * math.cos(s.theta) * dt
    y = s.y + s.v * math.sin(s.theta) * dt
    theta = normalize_angle(s.theta + s.v * math.tan(c.steer) / wheelbase * dt)
    v = max(0.0, s.v + c.accel * dt)
    return KbmState(x, y, theta, v)


def estimate_controls(curr: BevSnapshot, prev: BevSnapshot | None,
                      actor_id: str, dt: float) -> ControlEstimate:
    """Finite-difference controls of a surrounding vehicle.

    Acceleration comes from the speed difference between consecutive
    snapshots; steering inverts the heading-rate relation of the bicycle
    model using the vehicle's length as wheelbase.  An actor missing from
    the previous snapshot coasts (zero controls).
    """
    now = curr.find(actor_id)
    if now is None:
        raise KeyError(f"actor {actor_id!r} not in current snapshot")
    before = prev.find(actor_id) if prev is not None else None
    if before is None:
        return ControlEstimate(0.0, 0.0)
    accel = (now.box.speed - before.box.speed) / dt
    accel = min(max(accel, -MAX_ACCEL), MAX_ACCEL)
    v = now.box.speed
    if v < MIN_SPEED_FOR_STEER:
        return ControlEstimate(accel, 0.0)
    dtheta = normalize_angle(now.box.center.theta - before.box.center.theta)
    steer = math.atan(dtheta / dt * now.box.length / v)
    steer = min(max(steer, -MAX_STEER), MAX_STEER)
    return ControlEstimate(accel, steer)


def lookahead_distance(v: float) -> float:
    """Pure-pursuit lookahead: half a second of travel, clamped."""
    return min(max(0.5 * v, 2.0), 8.0)


def pure_pursuit_steer(state: KbmState, waypoints, wheelbase: float) -> float | None:
    """Steering toward the first waypoint at or past the lookahead radius.

    Returns None when every waypoint is behind the vehicle (degenerate
    trajectory).  Curvature is 2 * lateral / distance^2 in the vehicle
    frame; steer = atan(curvature * wheelbase).
    """
    look = lookahead_distance(state.v)
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    target = None
    for wx, wy in waypoints:
        dx = wx - state.x
        dy = wy - state.y
        fx = dx * cos_t + dy * sin_t
        fy = -dx * sin_t + dy * cos_t
        if fx <= 0.05:
            continue
        target = (fx, fy)
        if math.hypot(fx, fy) >= look:
            break
    if target is None:
        return None
    fx, fy = target
    d2 = fx * fx + fy * fy
    if d2 < 1e-9:
        return 0.0
    curvature = 2.0 * fy / d2
    steer = math.atan(curvature * wheelbase)
    return min(max(steer, -MAX_STEER), MAX_STEER)


def ego_controls_from_trajectory(traj: Trajectory, ego: KbmState,
                                 wheelbase: float,
                                 accel_limit: float = 11.0,
                                 brake_limit: float = 20.0) -> ControlEstimate:
    """Parse (accel, steer) from a waypoint trajectory.

    The same rule drives both prediction and the vehicle controller, so a
    zero-noise one-step prediction of the ego matches the world's next ego
    state exactly.
    """
    if len(traj.waypoints) < 2:
        raise InvalidTrajectoryError("trajectory needs at least 2 waypoints")
    accel = (traj.desired_speed - ego.v) / traj.plan_dt
    accel = min(max(accel, -brake_limit), accel_limit)
    steer = pure_pursuit_steer(ego, traj.waypoints, wheelbase)
    if steer is None:
        # Every waypoint behind the vehicle: hold the wheel straight and
        # brake (the controller treats this as a degenerate trajectory).
        return ControlEstimate(-brake_limit, 0.0)
    return ControlEstimate(accel, steer)


def stop_signal_region(sig, road) -> OrientedBox | None:
    """Influence region of a stop signal (None when inactive)."""
    return signal_region(sig, road)


@dataclass
class PredictedBoxSet:
    """Predicted bounding boxes for the ego and all participants.

    Box rows follow the kernel layout (x, y, theta, speed, half_length,
    half_width) with half extents already enlarged; one row per frame
    offset in [0, horizon].
    """

    horizon_start: int
    horizon_len: int
    ego: np.ndarray
    actors: np.ndarray
    actor_ids: list[str] = field(default_factory=list)
    actor_kinds: list[str] = field(default_factory=list)

    def ego_box(self, offset: int) -> OrientedBox:
        return _row_to_box(self.ego[offset])

    def actor_box(self, index: int, offset: int) -> OrientedBox:
        return _row_to_box(self.actors[index, offset])

    def ego_speeds(self) -> np.ndarray:
        return self.ego[:, kernels.COL_V]


def _row_to_box(row: np.ndarray) -> OrientedBox:
    return OrientedBox(
        Pose2(float(row[0]), float(row[1]), float(row[2])),
        2.0 * float(row[4]),
        2.0 * float(row[5]),
        float(row[3]),
    )


def _box_rows_from_rollout(states: np.ndarray, length: float, width: float,
                           factors: np.ndarray) -> np.ndarray:
    rows = np.empty((states.shape[0], 6), dtype=np.float64)
    rows[:, :4] = states
    rows[:, kernels.COL_HL] = 0.5 * length * factors
    rows[:, kernels.COL_HW] = 0.5 * width * factors
    return rows


def _linear_factors(n: int, cap: float) -> np.ndarray:
    """1.0 at offset 0 growing linearly to ``cap`` at the last offset."""
    if n == 1:
        return np.array([1.0])
    return 1.0 + (cap - 1.0) * np.arange(n) / (n - 1)


def predict(curr: BevSnapshot, prev: BevSnapshot | None, ego_traj: Trajectory | None,
            horizon: int, dt: float,
            cap_ego: float = CAP_EGO,
            cap_vehicle: float = CAP_VEHICLE,
            cap_pedestrian: float = CAP_PEDESTRIAN,
            accel_limit: float = 11.0,
            brake_limit: float = 20.0) -> PredictedBoxSet:
    """Build the predicted box set over [frame, frame + horizon].

    Pure function of its inputs.  The ego follows controls parsed from the
    ADS trajectory; surrounding vehicles follow finite-difference control
    estimates; both are held fixed over the horizon.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = horizon + 1

    ego_box = curr.ego.box
    ego_state = KbmState(ego_box.center.x, ego_box.center.y,
                         ego_box.center.theta, ego_box.speed)
    if ego_traj is not None and len(ego_traj.waypoints) >= 2:
        ctrl = ego_controls_from_trajectory(ego_traj, ego_state, ego_box.length,
                                            accel_limit, brake_limit)
    else:
        ctrl = ControlEstimate(0.0, 0.0)
    ego_states = kernels.kbm_rollout(ego_state.x, ego_state.y, ego_state.theta,
                                     ego_state.v, ctrl.accel, ctrl.steer,
                                     ego_box.length, dt, horizon)
    ego_rows = _box_rows_from_rollout(ego_states, ego_box.length, ego_box.width,
                                      _linear_factors(n, cap_ego))

    rows_list: list[np.ndarray] = []
    ids: list[str] = []
    kinds: list[str] = []

    for p in curr.others:
        box = p.box
        if p.kind == VEHICLE:
            est = estimate_controls(curr, prev, p.participant_id, dt)
            states = kernels.kbm_rollout(box.center.x, box.center.y,
                                         box.center.theta, box.speed,
                                         est.accel, est.steer,
                                         box.length, dt, horizon)
            rows = _box_rows_from_rollout(states, box.length, box.width,
                                          _linear_factors(n, cap_vehicle))
        elif p.kind == PEDESTRIAN:
            steps = np.arange(n) * dt * box.speed
            states = np.empty((n, 4))
            states[:, 0] = box.center.x + steps * math.cos(box.center.theta)
            states[:, 1] = box.center.y + steps * math.sin(box.center.theta)
            states[:, 2] = box.center.theta
            states[:, 3] = box.speed
            rows = _box_rows_from_rollout(states, box.length, box.width,
                                          np.full(n, cap_pedestrian))
        else:  # static obstacle
            rows = np.tile(box.as_row(), (n, 1))
        rows_list.append(rows)
        ids.append(p.participant_id)
        kinds.append(p.kind)

    for sig, region in curr.active_regions():
        rows_list.append(np.tile(region.as_row(), (n, 1)))
        ids.append(sig.signal_id)
        kinds.append(STOP_SIGNAL_KIND)

    actors = (np.stack(rows_list) if rows_list
              else np.empty((0, n, 6), dtype=np.float64))
    return PredictedBoxSet(
        horizon_start=curr.frame,
        horizon_len=horizon,
        ego=ego_rows,
        actors=actors,
        actor_ids=ids,
        actor_kinds=kinds,
    )
