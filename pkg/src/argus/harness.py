"""Closed-loop runner: scripted ADS stubs, the vehicle controller, the
per-frame monitor -> gate -> (ADS | mitigator) -> controller -> world
pipeline, ground-truth violation detection, and run metrics.

The default loop is synchronous (the monitor completes within the frame)
for reproducibility; an asynchronous mode runs the monitor in a worker
thread and lets the gate consume the latest completed evaluation.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .gate import (
    ControlOwner,
    GateDecision,
    OWNER_ADS,
    OWNER_MITIGATOR,
    decide,
)
from .geometry import OrientedBox, Pose2, sat_intersects
from .mitigator import IdmParams, MitigationResult, NavPoint, mitigate
from .monitor import (
    BufferBank,
    HazardReport,
    MonitorConfig,
    evaluate,
    update_buffers,
)
from .prediction import (
    ControlEstimate,
    InvalidTrajectoryError,
    KbmState,
    SOURCE_ADS,
    Trajectory,
    ego_controls_from_trajectory,
    kbm_step,
    predict,
)
from .world import (
    BevSnapshot,
    NoiseParams,
    Polyline,
    STATIC_OBSTACLE,
    Scenario,
    World,
    signal_region,
)

# CARLA-leaderboard style penalty coefficients; the product of penalties
# forms the infraction score that scales route completion.
DEFAULT_PENALTIES = {
    "collision-pedestrian": 0.50,
    "collision-vehicle": 0.60,
    "collision-static": 0.65,
    "red-light": 0.70,
    "stop-sign": 0.80,
    "stall-timeout": 0.70,
}

COMPLETION_SLACK = 0.5


@dataclass(frozen=True)
class ViolationEvent:
    frame: int
    kind: str
    penalty: float
    actor_id: str | None = None

    def __post_init__(self):
        if not (0.0 < self.penalty <= 1.0):
            raise ValueError("penalty must be in (0, 1]")


@dataclass
class RunConfig:
    """Everything a run needs besides the scenario itself."""

    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    idm: IdmParams = field(default_factory=IdmParams)
    perception: float = 40.0
    cell_size: float = 1.0
    w_dev: float = 1.0
    w_turn: float = 0.5
    nav_lookahead: float = 30.0
    penalties: dict = field(default_factory=lambda: dict(DEFAULT_PENALTIES))
    async_monitor: bool = False
    noise_override: NoiseParams | None = None
    disable_noise: bool = False


@dataclass
class RunReport:
    """Outcome of one scenario run."""

    scenario: str
    argus: bool
    seed: int
    completed: bool
    success: bool
    route_completion: float
    infraction_score: float
    driving_score: float
    distance_km: float
    frames: int
    sim_time_s: float
    wall_time_s: float
    violations: list[ViolationEvent]
    takeovers: list[dict]
    safety_breaches: int
    end_reason: str

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "argus": self.argus,
            "seed": self.seed,
            "completed": self.completed,
            "success": self.success,
            "route_completion": self.route_completion,
            "infraction_score": self.infraction_score,
            "driving_score": self.driving_score,
            "distance_km": self.distance_km,
            "frames": self.frames,
            "sim_time_s": self.sim_time_s,
            "wall_time_s": self.wall_time_s,
            "violations": [
                {"frame": v.frame, "kind": v.kind, "penalty": v.penalty,
                 "actor_id": v.actor_id}
                for v in self.violations
            ],
            "takeovers": self.takeovers,
            "safety_breaches": self.safety_breaches,
            "end_reason": self.end_reason,
        }


# ---------------------------------------------------------------------------
# ADS stubs


class AdsStub:
    """Base for the scripted flawed planners standing in for a real ADS.

    Every stub emits a trajectory each frame and is deterministic for a
    given scenario.
    """

    kind = "abstract"

    def __init__(self, params: dict, scenario: Scenario):
        self.cruise = float(params.get("cruise_speed", 8.0))
        self.spacing = float(params.get("waypoint_spacing", 2.0))
        self.count = int(params.get("waypoint_count", 8))
        self.plan_dt = float(params.get("plan_dt", 0.5))
        self.scenario = scenario

    def _route_points(self, route: Polyline, x: float, y: float):
        s, _ = route.project(x, y)
        pts: list[tuple[float, float]] = []
        for k in range(1, self.count + 1):
            p = route.point_at(min(s + k * self.spacing, route.length))
            pt = (float(p[0]), float(p[1]))
            if not pts or pt != pts[-1]:
                pts.append(pt)
        if len(pts) < 2:
            # Past the end of the route: extend along the final heading.
            h = route.heading_at(route.length)
            base = pts[0] if pts else (x, y)
            pts = [base, (base[0] + math.cos(h), base[1] + math.sin(h))]
        return pts, s

    def plan(self, snapshot: BevSnapshot, route: Polyline, frame: int) -> Trajectory:
        raise NotImplementedError


class ObliviousFollower(AdsStub):
    """Tracks the route at cruise speed, blind to traffic."""

    kind = "oblivious-follower"

    def plan(self, snapshot, route, frame):
        pts, _ = self._route_points(route, snapshot.ego.box.center.x,
                                    snapshot.ego.box.center.y)
        return Trajectory(tuple(pts), self.cruise, SOURCE_ADS, self.plan_dt)


class SignalIgnorer(ObliviousFollower):
    """Route follower that never reacts to stop signs or red lights."""

    kind = "signal-ignorer"


class Freezer(AdsStub):
    """Stops dead whenever a static obstacle sits ahead in the lane.

    Mimics a planner that cannot produce a feasible path around an
    obstruction: waypoints still follow the route but the desired speed
    drops to zero until the obstruction clears.
    """

    kind = "freezer"

    def __init__(self, params, scenario):
        super().__init__(params, scenario)
        self.panic_range = float(params.get("panic_range", 15.0))
        self.panic_halfwidth = float(params.get("panic_halfwidth", 2.5))

    def _blocked(self, snapshot) -> bool:
        ego = snapshot.ego.box.center
        cos_t = math.cos(ego.theta)
        sin_t = math.sin(ego.theta)
        for p in snapshot.others:
            if p.kind != STATIC_OBSTACLE:
                continue
            dx = p.box.center.x - ego.x
            dy = p.box.center.y - ego.y
            fx = dx * cos_t + dy * sin_t
            fy = -dx * sin_t + dy * cos_t
            if 0.0 < fx < self.panic_range and abs(fy) < self.panic_halfwidth:
                return True
        return False

    def plan(self, snapshot, route, frame):
        pts, _ = self._route_points(route, snapshot.ego.box.center.x,
                                    snapshot.ego.box.center.y)
        speed = 0.0 if self._blocked(snapshot) else self.cruise
        return Trajectory(tuple(pts), speed, SOURCE_ADS, self.plan_dt)


class Swerver(AdsStub):
    """Route follower that drifts laterally through a station window.

    Reproduces a planner emitting an unsafe trajectory: between
    ``swerve_from`` and ``swerve_until`` (route stations, meters) the
    waypoints shift sideways by up to ``swerve_offset`` (signed; positive
    is left of the route direction)."""

    kind = "swerver"

    def __init__(self, params, scenario):
        super().__init__(params, scenario)
        self.swerve_from = float(params.get("swerve_from", 40.0))
        self.swerve_until = float(params.get("swerve_until", 90.0))
        self.swerve_offset = float(params.get("swerve_offset", 2.5))
        self.ramp = float(params.get("swerve_ramp", 0.15))  # meters per meter

    def plan(self, snapshot, route, frame):
        ego = snapshot.ego.box.center
        pts, s = self._route_points(route, ego.x, ego.y)
        out = []
        for k, (px, py) in enumerate(pts):
            sk = s + (k + 1) * self.spacing
            if self.swerve_from <= sk <= self.swerve_until:
                ramp_in = (sk - self.swerve_from) * self.ramp
                off = math.copysign(min(abs(self.swerve_offset), ramp_in),
                                    self.swerve_offset)
                h = route.heading_at(min(sk, route.length))
                out.append((px - math.sin(h) * off, py + math.cos(h) * off))
            else:
                out.append((px, py))
        dedup = [out[0]]
        for p in out[1:]:
            if p != dedup[-1]:
                dedup.append(p)
        if len(dedup) < 2:
            dedup = pts
        return Trajectory(tuple(dedup), self.cruise, SOURCE_ADS, self.plan_dt)


STUB_KINDS = {
    cls.kind: cls
    for cls in (ObliviousFollower, SignalIgnorer, Freezer, Swerver)
}


def build_stub(ads: dict, scenario: Scenario) -> AdsStub:
    kind = ads.get("kind", "oblivious-follower")
    try:
        cls = STUB_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown ADS stub kind {kind!r}") from None
    return cls(ads, scenario)


# ---------------------------------------------------------------------------
# Vehicle controller


def vehicle_controller(state: KbmState, traj: Trajectory, dt: float,
                       wheelbase: float, accel_limit: float = 11.0,
                       brake_limit: float = 20.0) -> tuple[float, float]:
    """Convert a trajectory into (accel, steer) commands.

    Speed control is proportional toward the desired speed over the
    trajectory's plan step, bounded by the acceleration and braking
    limits; steering is pure pursuit toward the lookahead waypoint.  The
    identical rule feeds motion prediction, so the commands match the
    predicted ego controls exactly.  Degenerate trajectories brake fully.
    """
    try:
        ctrl = ego_controls_from_trajectory(traj, state, wheelbase,
                                            accel_limit, brake_limit)
    except InvalidTrajectoryError:
        return (-brake_limit, 0.0)
    return (ctrl.accel, ctrl.steer)


# ---------------------------------------------------------------------------
# Ground-truth violation tracking


class _SignalTransitTracker:
    """Watches actual stop-region transits and emits violations.

    A transit that never drops to a complete stop while the signal is
    active becomes a violation when the ego exits the region; a transit
    interrupted by deactivation (valid stop or scheduled green) is clean.
    """

    def __init__(self, world: World, stop_speed: float, penalties: dict):
        self.world = world
        self.stop_speed = stop_speed
        self.penalties = penalties
        self._tracking: dict[str, float] = {}

    def update(self, frame: int) -> list[ViolationEvent]:
        events = []
        ego_box = self.world.ego_box()
        v = self.world.ego.v
        for sig in self.world.signals:
            region = signal_region(sig, self.world.road) if sig.active else None
            overlapping = region is not None and sat_intersects(ego_box, region)
            if sig.signal_id in self._tracking:
                if overlapping:
                    self._tracking[sig.signal_id] = min(
                        self._tracking[sig.signal_id], v)
                else:
                    min_v = self._tracking.pop(sig.signal_id)
                    if sig.active and min_v > self.stop_speed:
                        kind = ("stop-sign" if sig.kind == "stop-sign"
                                else "red-light")
                        events.append(ViolationEvent(
                            frame, kind, self.penalties[kind], sig.signal_id))
                        sig.active = False  # the approach is consumed
            elif overlapping:
                self._tracking[sig.signal_id] = v
        return events


class _StallTracker:
    """Counts consecutive near-stopped time outside any influence region."""

    def __init__(self, world: World, stop_speed: float, timeout_s: float,
                 penalties: dict):
        self.world = world
        self.stop_speed = stop_speed
        self.timeout_s = timeout_s
        self.penalties = penalties
        self._stalled_s = 0.0
        self._fired = False

    def update(self, frame: int, dt: float) -> list[ViolationEvent]:
        if self._fired:
            return []
        v = self.world.ego.v
        inside = False
        if v < self.stop_speed:
            ego_box = self.world.ego_box()
            for sig in self.world.signals:
                if not sig.active:
                    continue
                region = signal_region(sig, self.world.road)
                if region is not None and sat_intersects(ego_box, region):
                    inside = True
                    break
        if v < self.stop_speed and not inside:
            self._stalled_s += dt
            if self._stalled_s >= self.timeout_s:
                self._fired = True
                return [ViolationEvent(frame, "stall-timeout",
                                       self.penalties["stall-timeout"])]
        else:
            self._stalled_s = 0.0
        return []


def _collision_events(world: World, frame: int, penalties: dict):
    ego_box = world.ego_box()
    for aid in world.actors:
        spec = world.actors[aid][0]
        if sat_intersects(ego_box, world.actor_box(aid)):
            kind = {
                "vehicle": "collision-vehicle",
                "pedestrian": "collision-pedestrian",
                "static-obstacle": "collision-static",
            }[spec.kind]
            return [ViolationEvent(frame, kind, penalties[kind], aid)]
    return []


# ---------------------------------------------------------------------------
# Asynchronous monitor


class AsyncHazardMonitor:
    """Runs predict/evaluate/update in a worker thread.

    The bank has a single writer (this thread); the gate reads under the
    same lock, so it always sees fully written frames.  Only the most
    recent submitted job is processed; older ones are dropped.
    """

    def __init__(self, cfg: RunConfig, dt: float):
        self.cfg = cfg
        self.dt = dt
        self.bank = BufferBank(cfg.monitor)
        self.lock = threading.Lock()
        self.latest_report: HazardReport | None = None
        self._job = None
        self._cv = threading.Condition()
        self._stop = False
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def submit(self, snap, prev, traj, in_takeover: bool):
        with self._cv:
            self._job = (snap, prev, traj, in_takeover)
            self._cv.notify()

    def _loop(self):
        while True:
            with self._cv:
                while self._job is None and not self._stop:
                    self._cv.wait()
                if self._stop:
                    return
                snap, prev, traj, in_takeover = self._job
                self._job = None
            m = self.cfg.monitor
            boxes = predict(snap, prev, traj, m.horizon, self.dt,
                            m.cap_ego, m.cap_vehicle, m.cap_pedestrian,
                            self.cfg.idm.a_max, self.cfg.idm.b_comf)
            with self.lock:
                report = evaluate(boxes, snap, self.bank, m)
                update_buffers(report, self.bank, in_takeover, m)
                self.latest_report = report

    def drain(self, timeout: float = 1.0):
        """Wait until the submitted job has been consumed (tests only)."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._cv:
                if self._job is None:
                    return
            time.sleep(0.0005)

    def close(self):
        with self._cv:
            self._stop = True
            self._cv.notify()
        self._thread.join(timeout=2.0)


# ---------------------------------------------------------------------------
# The run loop


def nav_target(route: Polyline, ego: Pose2, lookahead: float,
               perception: float, obstacles=(), ego_length: float = 4.0,
               clearance: float = 1.5) -> NavPoint:
    """Navigation point for the mitigator.

    Takes the route position a lookahead ahead of the ego, pulled back
    inside the perception range, then walked forward past any static
    obstacle whose inflated footprint would swallow it (a goal inside
    inflation padding is unreachable by construction, not in reality).
    """
    s, _ = route.project(ego.x, ego.y)
    s_nav = min(s + lookahead, route.length)
    while s_nav > s + 2.0:
        p = route.point_at(s_nav)
        if math.hypot(p[0] - ego.x, p[1] - ego.y) <= 0.95 * perception:
            break
        s_nav -= 1.0

    def padded(px: float, py: float) -> bool:
        for box in obstacles:
            grown = OrientedBox(box.center,
                                box.length + ego_length + 2.0 * clearance,
                                box.width + ego_length + 2.0 * clearance)
            if grown.contains_point(px, py):
                return True
        return False

    p = route.point_at(s_nav)
    if padded(float(p[0]), float(p[1])):
        s_try = s_nav
        while s_try < route.length:
            s_try = min(s_try + 2.0, route.length)
            q = route.point_at(s_try)
            if math.hypot(q[0] - ego.x, q[1] - ego.y) > 0.95 * perception:
                break
            if not padded(float(q[0]), float(q[1])):
                s_nav = s_try
                p = q
                break
    return NavPoint(float(p[0]), float(p[1]), route.heading_at(s_nav))


def run_scenario(scenario: Scenario, argus_enabled: bool,
                 cfg: RunConfig | None = None) -> tuple[RunReport, list[dict]]:
    """Run one scenario end to end; returns the report and trace records.

    The run ends at route completion, a collision, a stall timeout, or the
    scenario time limit.  Violations are detected from ground truth,
    independent of the monitor.
    """
    cfg = cfg or RunConfig()
    world = World(scenario)
    stub = build_stub(scenario.ads, world.scenario)
    dt = scenario.dt
    mcfg = cfg.monitor

    noise = None if cfg.disable_noise else (cfg.noise_override or scenario.noise)
    rng = np.random.default_rng(scenario.seed)

    bank = BufferBank(mcfg)
    owner = ControlOwner()
    amonitor = AsyncHazardMonitor(cfg, dt) if (argus_enabled and cfg.async_monitor) else None
    if amonitor is not None:
        bank = amonitor.bank

    sig_tracker = _SignalTransitTracker(world, mcfg.stop_speed, cfg.penalties)
    stall_tracker = _StallTracker(world, mcfg.stop_speed,
                                  scenario.stall_timeout_s, cfg.penalties)

    records: list[dict] = []
    violations: list[ViolationEvent] = []
    takeovers: list[dict] = []
    max_station = 0.0
    distance_m = 0.0
    max_frames = int(math.ceil(scenario.time_limit_s / dt))
    prev_snap: BevSnapshot | None = None
    end_reason = "time-limit"
    wall_start = time.perf_counter()

    frame = 0
    for frame in range(max_frames):
        world.update_signals(frame, mcfg.stop_speed)
        snap = world.snapshot(frame, noise, rng)
        ads_traj = stub.plan(snap, scenario.route, frame)

        report: HazardReport | None = None
        decision = GateDecision(True, False)
        mit: MitigationResult | None = None
        fired_takeover = None
        returned = False

        if argus_enabled:
            in_takeover = owner.owner == OWNER_MITIGATOR
            if amonitor is not None:
                amonitor.submit(snap, prev_snap, ads_traj, in_takeover)
                with amonitor.lock:
                    report = amonitor.latest_report
                    decision, owner_new = decide(bank, owner, mcfg)
            else:
                boxes = predict(snap, prev_snap, ads_traj, mcfg.horizon, dt,
                                mcfg.cap_ego, mcfg.cap_vehicle,
                                mcfg.cap_pedestrian,
                                cfg.idm.a_max, cfg.idm.b_comf)
                report = evaluate(boxes, snap, bank, mcfg)
                update_buffers(report, bank, in_takeover, mcfg)
                decision, owner_new = decide(bank, owner, mcfg)
            if owner_new.owner == OWNER_MITIGATOR and owner.owner == OWNER_ADS:
                fired_takeover = owner_new.takeover_cause
                takeovers.append({"frame": frame,
                                  "cause": owner_new.takeover_cause,
                                  "return_frame": None})
            if decision.control_returned:
                returned = True
                if takeovers:
                    takeovers[-1]["return_frame"] = frame
            owner = owner_new

        if decision.activate_mitigator:
            statics = [o.box for o in snap.others if o.kind == STATIC_OBSTACLE]
            nav = nav_target(scenario.route, snap.ego.box.center,
                             cfg.nav_lookahead, cfg.perception,
                             statics, world.ego_length)
            mit = mitigate(snap, nav, report, cfg.idm, dt,
                           cfg.perception, cfg.cell_size, cfg.w_dev, cfg.w_turn)
            traj = mit.trajectory
        else:
            traj = ads_traj

        ego_state = KbmState(world.ego.x, world.ego.y, world.ego.theta, world.ego.v)
        accel, steer = vehicle_controller(ego_state, traj, dt, world.ego_length,
                                          cfg.idm.a_max, cfg.idm.b_comf)
        new_ego = kbm_step(ego_state, ControlEstimate(accel, steer),
                           world.ego_length, dt)
        distance_m += math.hypot(new_ego.x - ego_state.x, new_ego.y - ego_state.y)
        world.ego.x, world.ego.y = new_ego.x, new_ego.y
        world.ego.theta, world.ego.v = new_ego.theta, new_ego.v
        world.advance_participants(frame, dt)

        frame_events: list[ViolationEvent] = []
        frame_events += _collision_events(world, frame, cfg.penalties)
        frame_events += sig_tracker.update(frame)
        frame_events += stall_tracker.update(frame, dt)
        violations += frame_events

        station, _ = scenario.route.project(world.ego.x, world.ego.y)
        max_station = max(max_station, station)

        rec = {
            "frame": frame,
            "ego": [world.ego.x, world.ego.y, world.ego.theta, world.ego.v],
            "others": [
                [aid, st.x, st.y, st.theta, st.v]
                for aid, (_, st, _) in world.actors.items()
            ],
            "signals": [[s.signal_id, 1 if s.active else 0] for s in world.signals],
            "owner": owner.owner,
            "dispatch": "MITIGATOR" if decision.activate_mitigator else "ADS",
            "takeover": fired_takeover,
            "returned": returned,
            "hazard": None if report is None else [
                -1 if report.min_collision_frame is None else report.min_collision_frame,
                int(report.collision_flag), int(report.sigvio_flag),
                int(report.stalling_flag),
            ],
            "colliding": sorted(report.colliding_actors) if report else [],
            "desired_speed": traj.desired_speed,
            "cmds": [accel, steer],
            "violations": [[v.kind, v.penalty, v.actor_id] for v in frame_events],
            "progress": station,
        }
        if mit is not None:
            rec["leads"] = [[l.actor_id, l.net_gap, l.rel_speed] for l in mit.leads]
            rec["occ_blocked"] = mit.occupancy_blocked
        records.append(rec)

        prev_snap = snap

        if any(v.kind.startswith("collision") for v in frame_events):
            end_reason = "collision"
            break
        if any(v.kind == "stall-timeout" for v in frame_events):
            end_reason = "stall-timeout"
            break
        if max_station >= scenario.route_length - COMPLETION_SLACK:
            end_reason = "completed"
            break

    if amonitor is not None:
        amonitor.close()

    completed = end_reason == "completed"
    rc = 100.0 if completed else min(
        100.0, 100.0 * max_station / scenario.route_length)
    infraction = 1.0
    for v in violations:
        infraction *= v.penalty
    report_out = RunReport(
        scenario=scenario.name,
        argus=argus_enabled,
        seed=scenario.seed,
        completed=completed,
        success=completed and not violations,
        route_completion=rc,
        infraction_score=infraction,
        driving_score=rc * infraction,
        distance_km=distance_m / 1000.0,
        frames=len(records),
        sim_time_s=len(records) * dt,
        wall_time_s=time.perf_counter() - wall_start,
        violations=violations,
        takeovers=takeovers,
        safety_breaches=count_safety_breaches(records),
        end_reason=end_reason,
    )
    return report_out, records


# ---------------------------------------------------------------------------
# Trace invariant and aggregation


def count_safety_breaches(records: list[dict]) -> int:
    """Per-frame safety invariant over a trace.

    Under mitigator control no ground-truth violation may occur; under ADS
    control a violation is excused only when a takeover fires by the next
    frame.  Returns the number of breaching frames.
    """
    breaches = 0
    for i, rec in enumerate(records):
        violated = bool(rec.get("violations"))
        if not violated:
            continue
        if rec["owner"] == OWNER_MITIGATOR and rec.get("takeover") is None:
            breaches += 1
            continue
        fired_now = rec.get("takeover") is not None
        fired_next = (i + 1 < len(records)
                      and records[i + 1].get("takeover") is not None)
        if not (fired_now or fired_next):
            breaches += 1
    return breaches


def aggregate(reports: list[RunReport]) -> dict:
    """Benchmark summary over a set of runs.

    Success rate and mean completion/driving score, plus violations per
    kilometer split by kind.
    """
    if not reports:
        raise ValueError("aggregate needs at least one report")
    n = len(reports)
    total_km = sum(r.distance_km for r in reports)
    by_kind: dict[str, int] = {}
    for r in reports:
        for v in r.violations:
            by_kind[v.kind] = by_kind.get(v.kind, 0) + 1
    coll = sum(c for k, c in by_kind.items() if k.startswith("collision"))
    stop = sum(c for k, c in by_kind.items() if k in ("stop-sign", "red-light"))
    stall = by_kind.get("stall-timeout", 0)
    per_km = lambda count: (count / total_km) if total_km > 0 else 0.0  # noqa: E731
    return {
        "runs": n,
        "success_rate": 100.0 * sum(1 for r in reports if r.success) / n,
        "route_completion": sum(r.route_completion for r in reports) / n,
        "driving_score": sum(r.driving_score for r in reports) / n,
        "total_km": total_km,
        "violations": dict(sorted(by_kind.items())),
        "collisions_per_km": per_km(coll),
        "stops_per_km": per_km(stop),
        "stalls_per_km": per_km(stall),
        "safety_breaches": sum(r.safety_breaches for r in reports),
    }
