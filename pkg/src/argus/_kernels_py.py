"""Pure-Python mirror of the compiled kernels.

Every function here is written with exactly the same operation order as
its Cython twin in ``_kernels.pyx`` so both backends produce identical
results (the parity tests assert bitwise equality).  Box-sequence arrays
use one row per frame offset with columns

    0: x  1: y  2: theta  3: speed  4: half_length  5: half_width

where half extents already include any enlargement.
"""

from __future__ import annotations

import math

import numpy as np


def box_intersects(ax, ay, at, ahl, ahw, bx, by, bt, bhl, bhw):
    """Closed-set overlap test for two oriented rectangles.

    Touching edges count as an intersection: a pair is separated only if
    the projection gap on some axis is strictly positive.
    """
    ac = math.cos(at)
    as_ = math.sin(at)
    bc = math.cos(bt)
    bs = math.sin(bt)
    dx = bx - ax
    dy = by - ay
    # Axis 1: a's length direction.
    dist = abs(dx * ac + dy * as_)
    ra = ahl
    rb = bhl * abs(bc * ac + bs * as_) + bhw * abs(-bs * ac + bc * as_)
    if dist > ra + rb:
        return False
    # Axis 2: a's width direction.
    dist = abs(dx * -as_ + dy * ac)
    ra = ahw
    rb = bhl * abs(bc * -as_ + bs * ac) + bhw * abs(-bs * -as_ + bc * ac)
    if dist > ra + rb:
        return False
    # Axis 3: b's length direction.
    dist = abs(dx * bc + dy * bs)
    ra = ahl * abs(ac * bc + as_ * bs) + ahw * abs(-as_ * bc + ac * bs)
    rb = bhl
    if dist > ra + rb:
        return False
    # Axis 4: b's width direction.
    dist = abs(dx * -bs + dy * bc)
    ra = ahl * abs(ac * -bs + as_ * bc) + ahw * abs(-as_ * -bs + ac * bc)
    rb = bhw
    if dist > ra + rb:
        return False
    return True


def first_hit_offsets(ego, actors):
    """First frame offset at which each actor's box overlaps the ego box.

    ``ego`` is an (n_frames, 6) array, ``actors`` an (n_actors, n_frames, 6)
    array.  Returns an int64 array with one entry per actor, -1 when the
    actor never intersects the ego over the horizon.
    """
    ego = np.ascontiguousarray(ego, dtype=np.float64)
    actors = np.ascontiguousarray(actors, dtype=np.float64)
    n_actors = actors.shape[0]
    n_frames = ego.shape[0]
    out = np.full(n_actors, -1, dtype=np.int64)
    for k in range(n_actors):
        for i in range(n_frames):
            e = ego[i]
            o = actors[k, i]
            if box_intersects(
                e[0], e[1], e[2], e[4], e[5], o[0], o[1], o[2], o[4], o[5]
            ):
                out[k] = i
                break
    return out


def overlap_mask(ego, box):
    """Per-offset overlap flags between the ego box sequence and one box.

    ``box`` is a single 6-element row; returns a uint8 array of length
    n_frames with 1 where the boxes overlap.
    """
    ego = np.ascontiguousarray(ego, dtype=np.float64)
    box = np.ascontiguousarray(box, dtype=np.float64)
    n_frames = ego.shape[0]
    out = np.zeros(n_frames, dtype=np.uint8)
    for i in range(n_frames):
        e = ego[i]
        if box_intersects(
            e[0], e[1], e[2], e[4], e[5], box[0], box[1], box[2], box[4], box[5]
        ):
            out[i] = 1
    return out


def kbm_rollout(x, y, theta, v, accel, steer, wheelbase, dt, steps):
    """Forward-Euler rollout of the kinematic bicycle model.

    Controls are held fixed.  Speed is clamped at zero (no reverse) and
    the heading is wrapped to (-pi, pi] after every step.  Returns a
    (steps + 1, 4) array of (x, y, theta, v) rows starting at the input
    state.
    """
    out = np.empty((steps + 1, 4), dtype=np.float64)
    tan_steer = math.tan(steer)
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = theta
    out[0, 3] = v
    for i in range(steps):
        x = x + v * math.cos(theta) * dt
        y = y + v * math.sin(theta) * dt
        theta = theta + v * tan_steer / wheelbase * dt
        r = math.fmod(theta + math.pi, 2.0 * math.pi)
        if r <= 0.0:
            r += 2.0 * math.pi
        theta = r - math.pi
        v = v + accel * dt
        if v < 0.0:
            v = 0.0
        out[i + 1, 0] = x
        out[i + 1, 1] = y
        out[i + 1, 2] = theta
        out[i + 1, 3] = v
    return out
