"""Takeover driving: waypoint rerouting around static obstructions plus
IDM speed selection against an augmented set of leading actors.

Rerouting samples a cubic Bezier toward the navigation point, rasterizes
static obstacles (inflated by half the ego length) and road boundaries
into an ego-centered occupancy grid, and replans blocked stretches with
penalized A*.  Dynamic traffic is handled on the speed axis only: every
relevant actor becomes a leading actor whose gap and relative speed feed
the IDM, and the minimum of the resulting accelerations wins.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import OrientedBox, Pose2, bezier_sample, BezierControl
from .monitor import HazardReport
from .prediction import SOURCE_MITIGATOR, Trajectory
from .world import (
    BevSnapshot,
    PEDESTRIAN,
    STATIC_OBSTACLE,
    VEHICLE,
    Polyline,
    RoadMap,
    SIGNAL_REGION_SIZE,
)

# Desired speed is this fraction of the lane speed limit while mitigating.
SPEED_LIMIT_FACTOR = 0.72

# Lateral slack added to half the ego width when deciding what counts as
# "ahead along the rerouted waypoints".
CORRIDOR_MARGIN = 0.5

# Where inside a stop region the bumper should come to rest, measured
# forward from the region's near edge.  Deep enough that the footprints
# overlap robustly, shallow enough to stop well before the far edge.
STOP_TARGET_DEPTH = 0.5

KIND_VIRTUAL_SIGNAL = "stop-signal"


class UnreachableGoalError(RuntimeError):
    """No traversable goal among the remaining dense waypoints, or the
    grid search exhausted the map."""


@dataclass(frozen=True)
class IdmParams:
    """Car-following parameters.

    v0 is the desired speed; s0 the minimum net gap; T the desired time
    headway; a_max / b_comf the acceleration and comfortable braking
    magnitudes; exponent the free-road acceleration exponent.
    """

    v0: float = 8.0
    s0: float = 4.0
    T: float = 0.25
    a_max: float = 11.0
    b_comf: float = 20.0
    exponent: float = 4.0

    def __post_init__(self):
        for name in ("v0", "s0", "T", "a_max", "b_comf", "exponent"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IDM parameter {name} must be > 0")


@dataclass(frozen=True)
class LeadingActor:
    """Gap and closing speed of one real or virtual actor ahead."""

    actor_id: str
    net_gap: float
    rel_speed: float
    kind: str = VEHICLE

    def __post_init__(self):
        if self.net_gap < 0:
            raise ValueError("net_gap must be clamped to >= 0")


@dataclass(frozen=True)
class NavPoint:
    """Navigation target handed to the mitigator: position plus the route
    heading at that position."""

    x: float
    y: float
    heading: float


def idm_accel(v: float, lead: LeadingActor | None, p: IdmParams) -> float:
    """IDM longitudinal acceleration.

    With no leading actor only the free-road term applies.  The desired
    gap is floored at zero and the actual gap at 0.1 m (the interaction
    term is singular at zero gap).
    """
    free = 1.0 - (v / p.v0) ** p.exponent
    if lead is None:
        return p.a_max * free
    gap = max(lead.net_gap, 0.1)
    desired = p.s0 + v * p.T + v * lead.rel_speed / (2.0 * math.sqrt(p.a_max * p.b_comf))
    if desired < 0.0:
        desired = 0.0
    return p.a_max * (free - (desired / gap) ** 2)


# ---------------------------------------------------------------------------
# Dense waypoint generation


def _ray_intersection(p0, d0, p3, d3):
    """Intersection of the forward ray from p0 and the backward ray into p3.

    Returns None when the rays are (near-)parallel or the intersection is
    not ahead of p0 / behind p3.
    """
    denom = d0[0] * d3[1] - d0[1] * d3[0]
    if abs(denom) < 1e-9:
        return None
    rx = p3[0] - p0[0]
    ry = p3[1] - p0[1]
    t = (rx * d3[1] - ry * d3[0]) / denom
    u = (rx * d0[1] - ry * d0[0]) / denom
    if t <= 0.0 or u >= 0.0:
        return None
    return (p0[0] + t * d0[0], p0[1] + t * d0[1])


def dense_waypoints(ego: Pose2, nav: NavPoint, drivable: RoadMap, n: int) -> np.ndarray:
    """Cubic-Bezier reference path from the ego position to the nav point.

    The middle control points sit at the intersection of the ego heading
    ray and the nav heading ray, pulled into the drivable area; when the
    rays are parallel (or the intersection is behind either endpoint) they
    fall back to thirds of the chord, which reduces the curve to uniform
    sampling of the straight segment.
    """
    p0 = (ego.x, ego.y)
    p3 = (nav.x, nav.y)
    d0 = ego.heading_vector()
    d3 = (math.cos(nav.heading), math.sin(nav.heading))
    hit = _ray_intersection(p0, d0, p3, d3)
    if hit is None:
        p1 = (p0[0] + (p3[0] - p0[0]) / 3.0, p0[1] + (p3[1] - p0[1]) / 3.0)
        p2 = (p0[0] + 2.0 * (p3[0] - p0[0]) / 3.0, p0[1] + 2.0 * (p3[1] - p0[1]) / 3.0)
    else:
        clamped = drivable.clamp_into_drivable(hit[0], hit[1])
        p1 = p2 = clamped
    return bezier_sample(BezierControl(p0, p1, p2, p3), n)


# ---------------------------------------------------------------------------
# Occupancy map


@dataclass
class OccupancyMap:
    """Ego-centered binary occupancy grid over the perception range.

    ``grid[iy, ix]`` is nonzero for non-traversable cells.  The grid is
    axis-aligned in world coordinates with its lower-left corner at
    (origin.x - half_extent, origin.y - half_extent).
    """

    origin: Pose2
    cell_size: float
    half_extent: float
    grid: np.ndarray

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    @property
    def x0(self) -> float:
        return self.origin.x - self.half_extent

    @property
    def y0(self) -> float:
        return self.origin.y - self.half_extent

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        ix = int(math.floor((x - self.x0) / self.cell_size))
        iy = int(math.floor((y - self.y0) / self.cell_size))
        if 0 <= ix < self.size and 0 <= iy < self.size:
            return ix, iy
        return None

    def center_of(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.x0 + (ix + 0.5) * self.cell_size,
            self.y0 + (iy + 0.5) * self.cell_size,
        )

    def is_traversable(self, x: float, y: float) -> bool:
        cell = self.cell_of(x, y)
        if cell is None:
            return False
        return self.grid[cell[1], cell[0]] == 0

    def blocked_count(self) -> int:
        return int(self.grid.sum())

    def cleared_around(self, x: float, y: float, radius: float) -> "OccupancyMap":
        """Copy of the map with cells near (x, y) forced traversable.

        Obstacle inflation is padding, not a physical wall; when the ego
        has drifted into the padded zone this lets the planner route back
        out instead of declaring the start unreachable.
        """
        grid = self.grid.copy()
        cells = int(math.ceil(radius / self.cell_size))
        center = self.cell_of(x, y)
        if center is not None:
            for iy in range(max(0, center[1] - cells),
                            min(self.size, center[1] + cells + 1)):
                for ix in range(max(0, center[0] - cells),
                                min(self.size, center[0] + cells + 1)):
                    cx, cy = self.center_of(ix, iy)
                    if math.hypot(cx - x, cy - y) <= radius:
                        grid[iy, ix] = 0
        return OccupancyMap(self.origin, self.cell_size, self.half_extent, grid)


def _mark_box(omap: OccupancyMap, box: OrientedBox) -> None:
    """Mark every cell overlapping the (already inflated) box."""
    reach = math.hypot(box.half_length, box.half_width)
    lo = omap.cell_of(
        max(box.center.x - reach, omap.x0),
        max(box.center.y - reach, omap.y0),
    )
    span = omap.size * omap.cell_size
    hi = omap.cell_of(
        min(box.center.x + reach, omap.x0 + span - 1e-9),
        min(box.center.y + reach, omap.y0 + span - 1e-9),
    )
    if lo is None or hi is None:
        return
    half_cell = 0.5 * omap.cell_size
    cos_t = math.cos(box.center.theta)
    sin_t = math.sin(box.center.theta)
    for iy in range(lo[1], hi[1] + 1):
        for ix in range(lo[0], hi[0] + 1):
            cx, cy = omap.center_of(ix, iy)
            # SAT between the axis-aligned cell and the oriented box.
            dx = box.center.x - cx
            dy = box.center.y - cy
            if abs(dx) > half_cell + box.half_length * abs(cos_t) + box.half_width * abs(sin_t):
                continue
            if abs(dy) > half_cell + box.half_length * abs(sin_t) + box.half_width * abs(cos_t):
                continue
            along = dx * cos_t + dy * sin_t
            across = -dx * sin_t + dy * cos_t
            if abs(along) > box.half_length + half_cell * (abs(cos_t) + abs(sin_t)):
                continue
            if abs(across) > box.half_width + half_cell * (abs(sin_t) + abs(cos_t)):
                continue
            omap.grid[iy, ix] = 1


def _mark_polyline(omap: OccupancyMap, line: Polyline) -> None:
    """Rasterize a boundary polyline as a band of blocked cells."""
    step = 0.25 * omap.cell_size
    n = max(2, int(math.ceil(line.length / step)) + 1)
    pts = line.points_at(np.linspace(0.0, line.length, n))
    ix = np.floor((pts[:, 0] - omap.x0) / omap.cell_size).astype(np.int64)
    iy = np.floor((pts[:, 1] - omap.y0) / omap.cell_size).astype(np.int64)
    ok = (ix >= 0) & (ix < omap.size) & (iy >= 0) & (iy < omap.size)
    omap.grid[iy[ok], ix[ok]] = 1


def build_occupancy(ego: Pose2, perception: float, obstacles, boundaries,
                    ego_length: float, cell_size: float = 1.0) -> OccupancyMap:
    """Occupancy grid over the perception range around the ego.

    Static obstacles are inflated by half the ego length on every side so
    grid-level planning keeps real clearance; boundary polylines become
    non-traversable bands.  Content outside the perception range is
    clipped.
    """
    if perception <= 0:
        raise ValueError("perception range must be > 0")
    size = int(math.ceil(2.0 * perception / cell_size))
    omap = OccupancyMap(ego, cell_size, perception,
                        np.zeros((size, size), dtype=np.uint8))
    for box in obstacles:
        inflated = OrientedBox(
            box.center,
            box.length + ego_length,
            box.width + ego_length,
            0.0,
        )
        _mark_box(omap, inflated)
    for line in boundaries:
        _mark_polyline(omap, line)
    return omap


# ---------------------------------------------------------------------------
# Rerouting


_NEIGHBORS = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, math.sqrt(2.0)), (1, -1, math.sqrt(2.0)),
    (-1, 1, math.sqrt(2.0)), (-1, -1, math.sqrt(2.0)),
)


def _octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return max(dx, dy) + (math.sqrt(2.0) - 1.0) * min(dx, dy)


def a_star(omap: OccupancyMap, start: tuple[int, int], goal: tuple[int, int],
           dense: np.ndarray | None = None,
           w_dev: float = 1.0, w_turn: float = 0.5) -> list[tuple[int, int]]:
    """8-connected grid search from start to goal cell.

    Beyond plain step cost, each expansion pays w_dev per meter of
    distance between the entered cell and the nearest dense waypoint, and
    w_turn per radian of direction change.  Ties break on the smaller
    deviation penalty, then row-major cell order, which keeps the search
    deterministic.  Raises UnreachableGoalError when the open set runs dry.
    """
    n = omap.size
    grid = omap.grid

    dev_cache: dict[tuple[int, int], float] = {}

    def deviation(cell: tuple[int, int]) -> float:
        if dense is None or w_dev == 0.0:
            return 0.0
        d = dev_cache.get(cell)
        if d is None:
            cx, cy = omap.center_of(*cell)
            d = float(np.min(np.hypot(dense[:, 0] - cx, dense[:, 1] - cy)))
            dev_cache[cell] = d
        return d

    scale = omap.cell_size
    counter = 0
    start_dev = deviation(start)
    open_heap = [(_octile(start, goal) * scale, start_dev, start[1] * n + start[0],
                  counter, start, None)]
    g_score = {start: 0.0}
    came_from: dict[tuple[int, int], tuple[int, int] | None] = {}
    arrival_dir: dict[tuple[int, int], tuple[int, int] | None] = {}
    closed: set[tuple[int, int]] = set()

    while open_heap:
        _, _, _, _, current, cur_dir = heapq.heappop(open_heap)
        if current in closed:
            continue
        closed.add(current)
        arrival_dir[current] = cur_dir
        if current == goal:
            path = [current]
            while path[-1] in came_from and came_from[path[-1]] is not None:
                path.append(came_from[path[-1]])
            path.reverse()
            return path
        for dx, dy, step in _NEIGHBORS:
            nxt = (current[0] + dx, current[1] + dy)
            if not (0 <= nxt[0] < n and 0 <= nxt[1] < n):
                continue
            if grid[nxt[1], nxt[0]]:
                continue
            if nxt in closed:
                continue
            turn = 0.0
            if cur_dir is not None and w_turn != 0.0:
                prev_ang = math.atan2(cur_dir[1], cur_dir[0])
                this_ang = math.atan2(dy, dx)
                turn = abs(math.remainder(this_ang - prev_ang, 2.0 * math.pi))
            dev = deviation(nxt)
            cost = step * scale + w_dev * dev + w_turn * turn
            cand = g_score[current] + cost
            if cand < g_score.get(nxt, float("inf")):
                g_score[nxt] = cand
                came_from[nxt] = current
                counter += 1
                heapq.heappush(open_heap, (
                    cand + _octile(nxt, goal) * scale,
                    dev, nxt[1] * n + nxt[0], counter, nxt, (dx, dy),
                ))
    raise UnreachableGoalError(
        f"grid search exhausted the map between {start} and {goal}"
    )


def smooth(waypoints: list[tuple[float, float]], omap: OccupancyMap,
           passes: int = 3) -> list[tuple[float, float]]:
    """Corner-cutting averaging with traversability re-validation.

    Interior points move toward the average of their neighbors unless the
    move would land them in a non-traversable cell; endpoints stay fixed.
    Collinear, uniformly spaced input is left unchanged.
    """
    pts = [tuple(p) for p in waypoints]
    for _ in range(passes):
        if len(pts) < 3:
            break
        out = [pts[0]]
        for i in range(1, len(pts) - 1):
            nx = 0.25 * pts[i - 1][0] + 0.5 * pts[i][0] + 0.25 * pts[i + 1][0]
            ny = 0.25 * pts[i - 1][1] + 0.5 * pts[i][1] + 0.25 * pts[i + 1][1]
            if omap.is_traversable(nx, ny):
                out.append((nx, ny))
            else:
                out.append(pts[i])
        out.append(pts[-1])
        pts = out
    return pts


def reroute(dense: np.ndarray, omap: OccupancyMap,
            w_dev: float = 1.0, w_turn: float = 0.5) -> list[tuple[float, float]]:
    """Replace blocked stretches of the dense waypoints with grid detours.

    The output starts at the first dense waypoint (the ego position) and
    every waypoint lies in a traversable cell.  Raises
    UnreachableGoalError when no traversable goal remains or the grid
    search fails.
    """
    if len(dense) == 0:
        raise ValueError("dense waypoints must be non-empty")
    first = (float(dense[0][0]), float(dense[0][1]))
    if not omap.is_traversable(*first):
        if omap.cell_of(*first) is None:
            raise UnreachableGoalError("ego position is off the occupancy map")
        # The ego sits inside inflation padding; free its footprint so the
        # search can lead back out.
        omap = omap.cleared_around(first[0], first[1], 1.6)
        if not omap.is_traversable(*first):
            raise UnreachableGoalError("ego cell is not traversable")
    rerouted: list[tuple[float, float]] = [first]
    i = 1
    while i < len(dense):
        wp = (float(dense[i][0]), float(dense[i][1]))
        if omap.is_traversable(*wp):
            if wp != rerouted[-1]:
                rerouted.append(wp)
            i += 1
            continue
        # Drop blocked waypoints until one lands in a traversable cell.
        j = i + 1
        while j < len(dense) and not omap.is_traversable(float(dense[j][0]),
                                                         float(dense[j][1])):
            j += 1
        if j >= len(dense):
            raise UnreachableGoalError(
                "no traversable goal among the remaining dense waypoints"
            )
        start_cell = omap.cell_of(*rerouted[-1])
        goal_cell = omap.cell_of(float(dense[j][0]), float(dense[j][1]))
        if start_cell is None or goal_cell is None:
            raise UnreachableGoalError("detour endpoints left the occupancy map")
        path = a_star(omap, start_cell, goal_cell, dense, w_dev, w_turn)
        for cell in path[1:-1]:
            center = omap.center_of(*cell)
            if center != rerouted[-1]:
                rerouted.append(center)
        i = j
    return smooth(rerouted, omap)


def curvature_speed_cap(waypoints, lat_accel: float = 3.0,
                        brake: float = 3.0, floor: float = 2.0) -> float:
    """Speed cap so each upcoming bend can be taken within a lateral
    acceleration budget after comfortable braking on the way there.

    Keeps the tracking controller from cutting corners through detours
    while letting the ego approach a distant bend at speed; floored so it
    always makes progress.
    """
    cap = float("inf")
    dist = 0.0
    for i in range(1, len(waypoints) - 1):
        ax, ay = waypoints[i - 1]
        bx, by = waypoints[i]
        cx, cy = waypoints[i + 1]
        l1 = math.hypot(bx - ax, by - ay)
        l2 = math.hypot(cx - bx, cy - by)
        dist += l1
        if l1 < 1e-6 or l2 < 1e-6:
            continue
        turn = abs(math.remainder(
            math.atan2(cy - by, cx - bx) - math.atan2(by - ay, bx - ax),
            2.0 * math.pi,
        ))
        kappa = turn / max(min(l1, l2), 1e-6)
        if kappa > 1e-4:
            v_bend = math.sqrt(lat_accel / kappa)
            cap = min(cap, math.sqrt(v_bend * v_bend + 2.0 * brake * dist))
    return max(cap, floor)


# ---------------------------------------------------------------------------
# Leading actors and the full mitigation step


def augment_leading_actors(snapshot: BevSnapshot, report: HazardReport | None,
                           rerouted, ego_length: float, ego_width: float,
                           params: IdmParams) -> list[LeadingActor]:
    """Collect every actor that should cap the ego's speed.

    Included: the nearest vehicle ahead within the path corridor, every
    moving participant (vehicle or pedestrian) the monitor predicts a
    collision with when it projects ahead of the ego, static obstacles
    intersecting the corridor of the rerouted path, and the influence
    regions of active stop signals ahead.  Static obstacles stay out of
    the predicted-collision term on purpose: a detour already clears
    them, and braking for an obstruction the path avoids would trade a
    collision hazard for a stalling one.  Gaps are measured along the
    rerouted path, minus half lengths, clamped at zero.
    """
    if len(rerouted) < 2:
        return []
    path = Polyline(rerouted)
    ego_v = snapshot.ego.box.speed
    corridor = ego_width / 2.0 + CORRIDOR_MARGIN
    colliding = report.colliding_actors if report is not None else frozenset()
    half_ego = ego_length / 2.0

    leads: dict[str, LeadingActor] = {}

    def offer(actor_id, gap, rel, kind):
        gap = max(0.0, gap)
        prev = leads.get(actor_id)
        if prev is None or gap < prev.net_gap:
            leads[actor_id] = LeadingActor(actor_id, gap, rel, kind)

    nearest_vehicle: tuple[float, object] | None = None
    for p in snapshot.others:
        s, lat = path.project(p.box.center.x, p.box.center.y)
        ahead = 0.25 < s < path.length + p.box.length
        in_corridor = abs(lat) <= corridor + p.box.half_width
        heading_along = path.heading_at(min(s, path.length))
        v_along = p.box.speed * math.cos(p.box.center.theta - heading_along)
        gap = s - half_ego - p.box.half_length
        if p.kind == VEHICLE and ahead and in_corridor:
            if nearest_vehicle is None or gap < nearest_vehicle[0]:
                nearest_vehicle = (gap, (p, v_along))
        if p.kind == STATIC_OBSTACLE and ahead and in_corridor:
            offer(p.participant_id, gap, ego_v, STATIC_OBSTACLE)
        if (p.kind in (VEHICLE, PEDESTRIAN) and ahead
                and p.participant_id in colliding):
            offer(p.participant_id, gap, ego_v - v_along, p.kind)
    if nearest_vehicle is not None:
        gap, (p, v_along) = nearest_vehicle
        offer(p.participant_id, gap, ego_v - v_along, VEHICLE)

    for sig, region in snapshot.active_regions():
        s, lat = path.project(region.center.x, region.center.y)
        if not (0.25 < s < path.length + SIGNAL_REGION_SIZE):
            continue
        if abs(lat) > corridor + region.half_width:
            continue
        # Virtual leader for a stop region: place the standstill point
        # just inside the region's near edge, so the IDM equilibrium (net
        # gap = s0) rests the bumper there and the stop registers.
        target = s - region.half_length + STOP_TARGET_DEPTH
        gap = (target - half_ego) + params.s0
        offer(sig.signal_id, gap, ego_v, KIND_VIRTUAL_SIGNAL)

    return sorted(leads.values(), key=lambda l: (l.net_gap, l.actor_id))


@dataclass(frozen=True)
class MitigationResult:
    """Trajectory plus the intermediates worth tracing."""

    trajectory: Trajectory
    leads: tuple[LeadingActor, ...]
    occupancy_blocked: int
    rerouted: bool


def mitigate(snapshot: BevSnapshot, nav: NavPoint, report: HazardReport | None,
             params: IdmParams, dt: float,
             perception: float = 40.0, cell_size: float = 1.0,
             w_dev: float = 1.0, w_turn: float = 0.5) -> MitigationResult:
    """One full mitigation step: reroute, pick leading actors, set speed.

    The desired speed integrates the minimum IDM acceleration over one
    control step, clamped to [0, v0] with v0 tied to the current lane's
    speed limit.  When no traversable route exists the ego holds position
    and decays speed to zero.
    """
    ego_box = snapshot.ego.box
    ego_pose = ego_box.center
    lane = snapshot.drivable.nearest_lane(ego_pose.x, ego_pose.y)
    p = replace(params, v0=SPEED_LIMIT_FACTOR * lane.speed_limit)

    obstacles = [o.box for o in snapshot.others if o.kind == STATIC_OBSTACLE]
    omap = build_occupancy(ego_pose, perception, obstacles,
                           snapshot.boundaries, ego_box.length, cell_size)

    dist = math.hypot(nav.x - ego_pose.x, nav.y - ego_pose.y)
    n = max(2, min(64, int(math.ceil(dist / 1.0)) + 1))
    dense = dense_waypoints(ego_pose, nav, snapshot.drivable, n)

    try:
        waypoints = reroute(dense, omap, w_dev, w_turn)
        rerouted_ok = True
    except UnreachableGoalError:
        hold = (
            (ego_pose.x, ego_pose.y),
            (ego_pose.x + 0.5 * math.cos(ego_pose.theta),
             ego_pose.y + 0.5 * math.sin(ego_pose.theta)),
        )
        traj = Trajectory(hold, 0.0, SOURCE_MITIGATOR, plan_dt=dt)
        return MitigationResult(traj, (), omap.blocked_count(), False)

    leads = augment_leading_actors(snapshot, report, waypoints,
                                   ego_box.length, ego_box.width, p)
    v = ego_box.speed
    if leads:
        accel = min(idm_accel(v, lead, p) for lead in leads)
    else:
        accel = idm_accel(v, None, p)
    desired = min(max(v + dt * accel, 0.0), p.v0,
                  curvature_speed_cap(waypoints))

    traj = Trajectory(tuple((float(x), float(y)) for x, y in waypoints),
                      desired, SOURCE_MITIGATOR, plan_dt=dt)
    return MitigationResult(traj, tuple(leads), omap.blocked_count(), True)
