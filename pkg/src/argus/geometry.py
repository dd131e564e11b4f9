"""Planar poses, oriented bounding boxes, SAT overlap, and cubic Bezier curves.

All operations are pure functions of their inputs and safe to call from
any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    r = math.fmod(theta + math.pi, TWO_PI)
    if r <= 0.0:
        r += TWO_PI
    return r - math.pi


@dataclass(frozen=True)
class Pose2:
    """Position plus heading; heading is CCW from +x and wrapped to (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def heading_vector(self) -> tuple[float, float]:
        return (math.cos(self.theta), math.sin(self.theta))

    def distance_to(self, other: "Pose2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle footprint of an actor or virtual region at one frame.

    ``length`` runs along the heading, ``width`` across it.  ``speed`` is
    the scalar speed of whatever the box represents (0 for static regions).
    """

    center: Pose2
    length: float
    width: float
    speed: float = 0.0

    def __post_init__(self):
        if not (self.length > 0.0):
            raise ValueError(f"box length must be > 0, got {self.length}")
        if not (self.width > 0.0):
            raise ValueError(f"box width must be > 0, got {self.width}")
        if self.speed < 0.0:
            raise ValueError(f"box speed must be >= 0, got {self.speed}")

    @property
    def half_length(self) -> float:
        return 0.5 * self.length

    @property
    def half_width(self) -> float:
        return 0.5 * self.width

    def corners(self) -> np.ndarray:
        """The four corner points, CCW, as a (4, 2) array."""
        c = math.cos(self.center.theta)
        s = math.sin(self.center.theta)
        hl = self.half_length
        hw = self.half_width
        ux, uy = hl * c, hl * s
        nx, ny = -hw * s, hw * c
        cx, cy = self.center.x, self.center.y
        return np.array(
            [
                [cx + ux + nx, cy + uy + ny],
                [cx - ux + nx, cy - uy + ny],
                [cx - ux - nx, cy - uy - ny],
                [cx + ux - nx, cy + uy - ny],
            ]
        )

    def as_row(self) -> np.ndarray:
        """Kernel row (x, y, theta, speed, half_length, half_width)."""
        return np.array(
            [
                self.center.x,
                self.center.y,
                self.center.theta,
                self.speed,
                self.half_length,
                self.half_width,
            ]
        )

    def contains_point(self, x: float, y: float) -> bool:
        """Closed-set point containment."""
        c = math.cos(self.center.theta)
        s = math.sin(self.center.theta)
        dx = x - self.center.x
        dy = y - self.center.y
        along = dx * c + dy * s
        across = -dx * s + dy * c
        return abs(along) <= self.half_length and abs(across) <= self.half_width


def sat_intersects(a: OrientedBox, b: OrientedBox) -> bool:
    """Whether two boxes overlap (separating-axis test, closed-set).

    Touching edges count as an intersection, which is the conservative
    choice for safety monitoring.
    """
    return kernels.box_intersects(
        a.center.x,
        a.center.y,
        a.center.theta,
        a.half_length,
        a.half_width,
        b.center.x,
        b.center.y,
        b.center.theta,
        b.half_length,
        b.half_width,
    )


def enlarge_box(b: OrientedBox, factor: float) -> OrientedBox:
    """Scale a box's footprint about its center; pose and speed are kept."""
    if factor < 1.0:
        raise ValueError(f"enlargement factor must be >= 1, got {factor}")
    return OrientedBox(b.center, b.length * factor, b.width * factor, b.speed)


@dataclass(frozen=True)
class BezierControl:
    """Control points of a cubic Bezier curve."""

    p0: tuple[float, float]
    p1: tuple[float, float]
    p2: tuple[float, float]
    p3: tuple[float, float]


def bezier_sample(c: BezierControl, n: int) -> np.ndarray:
    """Sample a cubic Bezier at n uniformly spaced parameter values.

    The first sample equals p0 and the last equals p3 exactly.  Raises
    ValueError for n < 2.
    """
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    t = np.linspace(0.0, 1.0, n).reshape(-1, 1)
    omt = 1.0 - t
    p0 = np.asarray(c.p0, dtype=np.float64)
    p1 = np.asarray(c.p1, dtype=np.float64)
    p2 = np.asarray(c.p2, dtype=np.float64)
    p3 = np.asarray(c.p3, dtype=np.float64)
    return (
        omt**3 * p0
        + 3.0 * omt**2 * t * p1
        + 3.0 * omt * t**2 * p2
        + t**3 * p3
    )


def segment_intersects(p1, p2, q1, q2) -> bool:
    """Closed-set intersection test for two line segments."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and on_segment(q1, q2, p1):
        return True
    if d2 == 0 and on_segment(q1, q2, p2):
        return True
    if d3 == 0 and on_segment(p1, p2, q1):
        return True
    if d4 == 0 and on_segment(p1, p2, q2):
        return True
    return False
