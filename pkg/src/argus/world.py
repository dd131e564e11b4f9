"""Ground-truth world state: scenario loading, scripted traffic, stop
signals, and BEV snapshot production with optional perception noise.

Scenario files are JSON with a versioned ``schema_version`` field; all
distances are meters, angles radians, speeds m/s.  World mutation is
single-owner (exactly one simulation loop advances it); snapshots are
plain immutable values that may be handed to concurrent readers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import OrientedBox, Pose2, normalize_angle, sat_intersects

SCHEMA_VERSION = 1

EGO_VEHICLE = "ego-vehicle"
VEHICLE = "vehicle"
PEDESTRIAN = "pedestrian"
STATIC_OBSTACLE = "static-obstacle"
PARTICIPANT_KINDS = (VEHICLE, PEDESTRIAN, STATIC_OBSTACLE)

STOP_SIGN = "stop-sign"
RED_LIGHT = "red-light"

# Stop-signal influence regions are fixed-size squares placed on the lane.
SIGNAL_REGION_SIZE = 3.0


class ScenarioError(Exception):
    """Raised for unparseable, schema-invalid, or dangling scenario content."""


# ---------------------------------------------------------------------------
# Road geometry


class Polyline:
    """A 2D polyline with arclength parameterization helpers."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("polyline needs at least two 2D points")
        self.points = pts
        seg = np.diff(pts, axis=0)
        self._seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(self._seg_len <= 0.0):
            raise ValueError("polyline has zero-length segment")
        self._cum = np.concatenate([[0.0], np.cumsum(self._seg_len)])
        self._seg_dir = seg / self._seg_len[:, None]

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg_len) - 1)
        return self.points[i] + self._seg_dir[i] * (s - self._cum[i])

    def points_at(self, s) -> np.ndarray:
        """Vectorized point_at over an array of stations."""
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.length)
        i = np.clip(np.searchsorted(self._cum, s, side="right") - 1,
                    0, len(self._seg_len) - 1)
        return self.points[i] + self._seg_dir[i] * (s - self._cum[i])[:, None]

    def heading_at(self, s: float) -> float:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg_len) - 1)
        d = self._seg_dir[i]
        return math.atan2(d[1], d[0])

    def project(self, x: float, y: float) -> tuple[float, float]:
        """Arclength station and signed lateral offset of a point.

        Lateral is positive to the left of the travel direction.
        """
        p = np.array([x, y])
        best = (0.0, float("inf"), 0.0)
        for i in range(len(self._seg_len)):
            a = self.points[i]
            d = self._seg_dir[i]
            t = float(np.dot(p - a, d))
            t = min(max(t, 0.0), self._seg_len[i])
            q = a + d * t
            lat_vec = p - q
            dist = float(np.hypot(lat_vec[0], lat_vec[1]))
            if dist < best[1]:
                side = float(d[0] * lat_vec[1] - d[1] * lat_vec[0])
                lateral = math.copysign(dist, side) if dist > 0 else 0.0
                best = (float(self._cum[i] + t), dist, lateral)
        return best[0], best[2]


@dataclass(frozen=True)
class Lane:
    """A drivable strip: centerline polyline, width, and speed limit."""

    lane_id: str
    centerline: Polyline
    width: float
    speed_limit: float


class RoadMap:
    """Polyline lane graph plus road-boundary polylines."""

    def __init__(self, lanes: dict[str, Lane], boundaries: list[Polyline]):
        self.lanes = lanes
        self.boundaries = boundaries

    def lane(self, lane_id: str) -> Lane:
        try:
            return self.lanes[lane_id]
        except KeyError:
            raise ScenarioError(f"unknown lane {lane_id!r}") from None

    def nearest_lane(self, x: float, y: float) -> Lane:
        best = None
        best_d = float("inf")
        for lane in self.lanes.values():
            _, lat = lane.centerline.project(x, y)
            if abs(lat) < best_d:
                best_d = abs(lat)
                best = lane
        if best is None:
            raise ScenarioError("map has no lanes")
        return best

    def clamp_into_drivable(self, x: float, y: float, margin: float = 0.5):
        """Nearest point inside some lane strip (used to keep Bezier
        control points plausible)."""
        lane = self.nearest_lane(x, y)
        s, lat = lane.centerline.project(x, y)
        half = max(lane.width / 2.0 - margin, 0.1)
        if abs(lat) <= half:
            return (x, y)
        q = lane.centerline.point_at(s)
        h = lane.centerline.heading_at(s)
        lat_clamped = math.copysign(half, lat)
        # Left normal of the travel direction is (-sin h, cos h).
        return (
            float(q[0] - math.sin(h) * lat_clamped),
            float(q[1] + math.cos(h) * lat_clamped),
        )


# ---------------------------------------------------------------------------
# Participants and signals


@dataclass
class Participant:
    """One traffic participant (or the ego) as seen in a snapshot."""

    participant_id: str
    kind: str
    box: OrientedBox

    def __post_init__(self):
        if self.kind == STATIC_OBSTACLE and self.box.speed != 0.0:
            raise ValueError("static obstacles must have speed 0")


@dataclass
class StopSignal:
    """A stop sign or red light bound to a lane approach."""

    signal_id: str
    kind: str
    pose: Pose2
    lane_ref: str
    active: bool = True
    # Red lights may be scheduled to turn green; stop signs deactivate on a
    # valid stop.  Either way the signal stays inactive for the approach.
    deactivate_at_frame: int | None = None


def signal_region(sig: StopSignal, road: RoadMap) -> OrientedBox | None:
    """The influence region of an active signal: a 3x3 m square centered
    on the signal's lane at the stop line, oriented with the lane."""
    if not sig.active:
        return None
    lane = road.lane(sig.lane_ref)
    s, _ = lane.centerline.project(sig.pose.x, sig.pose.y)
    p = lane.centerline.point_at(s)
    h = lane.centerline.heading_at(s)
    return OrientedBox(
        Pose2(float(p[0]), float(p[1]), h),
        SIGNAL_REGION_SIZE,
        SIGNAL_REGION_SIZE,
        0.0,
    )


# ---------------------------------------------------------------------------
# Scripted behaviors


class Behavior:
    """Deterministic motion script for a non-ego participant."""

    def step(self, state: "ActorState", frame: int, dt: float) -> None:
        raise NotImplementedError


class StaticBehavior(Behavior):
    def step(self, state, frame, dt):
        pass


class FollowPolyline(Behavior):
    """Follow a polyline at a (possibly scheduled) speed.

    ``schedule`` is a list of (frame, target_speed) pairs; the actor ramps
    toward the most recent target at ``accel`` m/s^2.  Motion starts at
    ``start_frame`` and stops at the end of the polyline.
    """

    def __init__(self, path: Polyline, speed: float, start_frame: int = 0,
                 schedule=None, accel: float = 3.0):
        self.path = path
        self.cruise = speed
        self.start_frame = start_frame
        self.schedule = sorted(schedule or [])
        self.accel = accel
        self._station = 0.0

    def reset_station(self, x: float, y: float):
        self._station, _ = self.path.project(x, y)

    def _target_speed(self, frame: int) -> float:
        target = self.cruise
        for f, v in self.schedule:
            if frame >= f:
                target = v
        return target

    def step(self, state, frame, dt):
        if frame < self.start_frame:
            return
        target = self._target_speed(frame)
        dv = target - state.v
        dv = min(max(dv, -self.accel * dt), self.accel * dt)
        state.v = max(0.0, state.v + dv)
        self._station = min(self._station + state.v * dt, self.path.length)
        p = self.path.point_at(self._station)
        state.x = float(p[0])
        state.y = float(p[1])
        state.theta = self.path.heading_at(self._station)
        if self._station >= self.path.length:
            state.v = 0.0


def build_behavior(spec: dict, road: RoadMap, where: str) -> Behavior:
    name = spec.get("name")
    if name == "static":
        return StaticBehavior()
    if name == "lane_follow":
        lane_id = spec.get("lane")
        if lane_id not in road.lanes:
            raise ScenarioError(f"{where}: behavior references unknown lane {lane_id!r}")
        lane = road.lanes[lane_id]
        return FollowPolyline(
            lane.centerline,
            float(spec.get("speed", lane.speed_limit)),
            int(spec.get("start_frame", 0)),
            spec.get("schedule"),
            float(spec.get("accel", 3.0)),
        )
    if name == "path_follow":
        pts = spec.get("path")
        if not pts or len(pts) < 2:
            raise ScenarioError(f"{where}: path_follow needs a path with >= 2 points")
        return FollowPolyline(
            Polyline(pts),
            float(spec.get("speed", 1.4)),
            int(spec.get("start_frame", 0)),
            spec.get("schedule"),
            float(spec.get("accel", 3.0)),
        )
    raise ScenarioError(f"{where}: unknown behavior name {name!r}")


# ---------------------------------------------------------------------------
# Scenario


@dataclass(frozen=True)
class NoiseParams:
    """Gaussian perception noise plus dropout for non-ego participants."""

    position_sigma: float = 0.0
    heading_sigma: float = 0.0
    speed_sigma: float = 0.0
    drop_prob: float = 0.0


@dataclass
class ActorSpec:
    actor_id: str
    kind: str
    pose: Pose2
    length: float
    width: float
    speed: float
    behavior: dict


@dataclass
class Scenario:
    """A fully validated scenario: map, route, actors, signals, config."""

    name: str
    road: RoadMap
    route: Polyline
    ego_pose: Pose2
    ego_length: float
    ego_width: float
    ego_speed: float
    ads: dict
    actors: list[ActorSpec]
    signals: list[StopSignal]
    seed: int
    frame_rate: float
    time_limit_s: float
    stall_timeout_s: float
    noise: NoiseParams | None
    path: str | None = None

    @property
    def route_length(self) -> float:
        return self.route.length

    @property
    def dt(self) -> float:
        return 1.0 / self.frame_rate


def _require(cond: bool, where: str, msg: str):
    if not cond:
        raise ScenarioError(f"{where}: {msg}")


def _pose_from(raw, where: str) -> Pose2:
    _require(isinstance(raw, (list, tuple)) and len(raw) == 3, where,
             "pose must be [x, y, theta]")
    return Pose2(float(raw[0]), float(raw[1]), float(raw[2]))


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file.

    Raises ScenarioError with the offending location for parse errors,
    schema violations, and dangling references.
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"{path}: no such scenario file")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})") from e
    return parse_scenario(raw, str(path))


def parse_scenario(raw: dict, where: str = "<scenario>") -> Scenario:
    _require(isinstance(raw, dict), where, "top level must be an object")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"{where}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})"
        )

    map_raw = raw.get("map") or {}
    lanes: dict[str, Lane] = {}
    for i, ln in enumerate(map_raw.get("lanes", [])):
        loc = f"{where}: map.lanes[{i}]"
        _require("id" in ln and "centerline" in ln, loc, "lane needs id and centerline")
        try:
            center = Polyline(ln["centerline"])
        except ValueError as e:
            raise ScenarioError(f"{loc}: {e}") from e
        width = float(ln.get("width", 3.5))
        limit = float(ln.get("speed_limit", 11.1))
        _require(width > 0 and limit > 0, loc, "width and speed_limit must be > 0")
        lanes[str(ln["id"])] = Lane(str(ln["id"]), center, width, limit)
    _require(bool(lanes), f"{where}: map", "at least one lane is required")
    boundaries = []
    for i, b in enumerate(map_raw.get("boundaries", [])):
        try:
            boundaries.append(Polyline(b))
        except ValueError as e:
            raise ScenarioError(f"{where}: map.boundaries[{i}]: {e}") from e
    road = RoadMap(lanes, boundaries)

    route_raw = raw.get("route")
    _require(isinstance(route_raw, list) and len(route_raw) >= 2,
             f"{where}: route", "route needs >= 2 points")
    route = Polyline(route_raw)
    _require(route.length > 0, f"{where}: route", "route_length must be > 0")

    ego_raw = raw.get("ego") or {}
    ego_pose = _pose_from(ego_raw.get("pose"), f"{where}: ego.pose")
    ego_length = float(ego_raw.get("length", 4.0))
    ego_width = float(ego_raw.get("width", 2.0))
    ego_speed = float(ego_raw.get("speed", 0.0))
    _require(ego_length > 0 and ego_width > 0, f"{where}: ego", "dimensions must be > 0")
    _require(ego_speed >= 0, f"{where}: ego", "speed must be >= 0")

    actors: list[ActorSpec] = []
    seen_ids = {"ego"}
    for i, ar in enumerate(raw.get("actors", [])):
        loc = f"{where}: actors[{i}]"
        aid = str(ar.get("id", f"actor{i}"))
        _require(aid not in seen_ids, loc, f"duplicate actor id {aid!r}")
        seen_ids.add(aid)
        kind = ar.get("kind")
        _require(kind in PARTICIPANT_KINDS, loc, f"unknown participant kind {kind!r}")
        pose = _pose_from(ar.get("pose"), f"{loc}.pose")
        speed = float(ar.get("speed", 0.0))
        _require(speed >= 0, loc, "speed must be >= 0")
        if kind == STATIC_OBSTACLE:
            _require(speed == 0.0, loc, "static obstacles must have speed 0")
        behavior = ar.get("behavior") or {"name": "static"}
        # Validate the behavior spec (and its lane references) up front.
        build_behavior(behavior, road, loc)
        actors.append(
            ActorSpec(aid, kind, pose, float(ar.get("length", 4.0)),
                      float(ar.get("width", 2.0)), speed, behavior)
        )

    signals: list[StopSignal] = []
    for i, sg in enumerate(raw.get("signals", [])):
        loc = f"{where}: signals[{i}]"
        kind = sg.get("kind")
        _require(kind in (STOP_SIGN, RED_LIGHT), loc, f"unknown signal kind {kind!r}")
        lane_ref = sg.get("lane")
        _require(lane_ref in lanes, loc, f"signal references unknown lane {lane_ref!r}")
        signals.append(
            StopSignal(
                str(sg.get("id", f"signal{i}")),
                kind,
                _pose_from(sg.get("pose"), f"{loc}.pose"),
                str(lane_ref),
                bool(sg.get("active", True)),
                sg.get("deactivate_at_frame"),
            )
        )

    noise = None
    if raw.get("noise"):
        nz = raw["noise"]
        noise = NoiseParams(
            float(nz.get("position_sigma", 0.0)),
            float(nz.get("heading_sigma", 0.0)),
            float(nz.get("speed_sigma", 0.0)),
            float(nz.get("drop_prob", 0.0)),
        )
        _require(0.0 <= noise.drop_prob <= 1.0, f"{where}: noise",
                 "drop_prob must be in [0, 1]")

    frame_rate = float(raw.get("frame_rate", 20.0))
    _require(frame_rate > 0, where, "frame_rate must be > 0")

    return Scenario(
        name=str(raw.get("name", "unnamed")),
        road=road,
        route=route,
        ego_pose=ego_pose,
        ego_length=ego_length,
        ego_width=ego_width,
        ego_speed=ego_speed,
        ads=raw.get("ads") or {"kind": "oblivious-follower"},
        actors=actors,
        signals=signals,
        seed=int(raw.get("seed", 0)),
        frame_rate=frame_rate,
        time_limit_s=float(raw.get("time_limit_s", 90.0)),
        stall_timeout_s=float(raw.get("stall_timeout_s", 60.0)),
        noise=noise,
        path=where if where != "<scenario>" else None,
    )


# ---------------------------------------------------------------------------
# Snapshots and the mutable world


@dataclass(frozen=True)
class BevSnapshot:
    """Per-frame view of all traffic participants, signals, and the map."""

    frame: int
    ego: Participant
    others: tuple[Participant, ...]
    signals: tuple[StopSignal, ...]
    boundaries: tuple[Polyline, ...]
    drivable: RoadMap

    def find(self, participant_id: str) -> Participant | None:
        for p in self.others:
            if p.participant_id == participant_id:
                return p
        return None

    def active_regions(self) -> list[tuple[StopSignal, OrientedBox]]:
        out = []
        for sig in self.signals:
            region = signal_region(sig, self.drivable)
            if region is not None:
                out.append((sig, region))
        return out


@dataclass
class ActorState:
    x: float
    y: float
    theta: float
    v: float


class World:
    """The mutable ground-truth world advanced by the simulation loop."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.road = scenario.road
        self.ego = ActorState(scenario.ego_pose.x, scenario.ego_pose.y,
                              scenario.ego_pose.theta, scenario.ego_speed)
        self.ego_length = scenario.ego_length
        self.ego_width = scenario.ego_width
        self.actors: dict[str, tuple[ActorSpec, ActorState, Behavior]] = {}
        for spec in scenario.actors:
            state = ActorState(spec.pose.x, spec.pose.y, spec.pose.theta, spec.speed)
            behavior = build_behavior(spec.behavior, self.road, spec.actor_id)
            if isinstance(behavior, FollowPolyline):
                behavior.reset_station(state.x, state.y)
            self.actors[spec.actor_id] = (spec, state, behavior)
        self.signals = [replace(s) for s in scenario.signals]

    # -- projections -------------------------------------------------------

    def ego_box(self) -> OrientedBox:
        return OrientedBox(
            Pose2(self.ego.x, self.ego.y, self.ego.theta),
            self.ego_length, self.ego_width, self.ego.v,
        )

    def actor_box(self, actor_id: str) -> OrientedBox:
        spec, state, _ = self.actors[actor_id]
        return OrientedBox(Pose2(state.x, state.y, state.theta),
                           spec.length, spec.width, state.v)

    def snapshot(self, frame: int, noise: NoiseParams | None = None,
                 rng: np.random.Generator | None = None) -> BevSnapshot:
        """Project the world into a BevSnapshot.

        With ``noise`` given, every non-ego participant's position, heading
        and speed receive independent Gaussian perturbations and whole
        participants are dropped with the configured probability; the ego
        is never perturbed.
        """
        ego = Participant("ego", EGO_VEHICLE, self.ego_box())
        others: list[Participant] = []
        for aid in self.actors:
            box = self.actor_box(aid)
            kind = self.actors[aid][0].kind
            if noise is not None:
                if rng is None:
                    raise ValueError("noise injection needs an rng")
                # Draw all perturbations before the drop decision so the
                # stream consumption per participant is constant.
                if noise.position_sigma > 0:
                    dx, dy = rng.normal(0.0, noise.position_sigma, 2)
                else:
                    dx, dy = 0.0, 0.0
                dth = rng.normal(0.0, noise.heading_sigma) if noise.heading_sigma > 0 else 0.0
                dv = rng.normal(0.0, noise.speed_sigma) if noise.speed_sigma > 0 else 0.0
                dropped = noise.drop_prob > 0 and rng.random() < noise.drop_prob
                if dropped:
                    continue
                center = Pose2(box.center.x + dx, box.center.y + dy,
                               normalize_angle(box.center.theta + dth))
                speed = box.speed + dv if kind != STATIC_OBSTACLE else 0.0
                box = OrientedBox(center, box.length, box.width, max(0.0, speed))
            others.append(Participant(aid, kind, box))
        return BevSnapshot(
            frame=frame,
            ego=ego,
            others=tuple(others),
            signals=tuple(replace(s) for s in self.signals),
            boundaries=tuple(self.road.boundaries),
            drivable=self.road,
        )

    # -- dynamics ----------------------------------------------------------

    def advance_participants(self, frame: int, dt: float) -> None:
        """Advance every non-ego participant per its behavior script."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        for _, state, behavior in self.actors.values():
            behavior.step(state, frame, dt)

    def update_signals(self, frame: int, stop_speed: float) -> None:
        """Scheduled deactivations plus the valid-stop rule for stop signs.

        A stop sign deactivates once the ego comes to a complete stop
        (speed <= stop_speed) while its box overlaps the influence region;
        it then stays inactive for that approach.
        """
        ego_box = self.ego_box()
        for sig in self.signals:
            if not sig.active:
                continue
            if sig.deactivate_at_frame is not None and frame >= sig.deactivate_at_frame:
                sig.active = False
                continue
            if sig.kind == STOP_SIGN and self.ego.v <= stop_speed:
                region = signal_region(sig, self.road)
                if region is not None and sat_intersects(ego_box, region):
                    sig.active = False
