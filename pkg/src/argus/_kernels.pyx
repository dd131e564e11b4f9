# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot-path kernels.

Mirrors ``_kernels_py`` exactly (same operation order) so the two
backends are interchangeable; see that module for the array layout.
"""

from libc.math cimport cos, sin, tan, fabs, fmod, M_PI

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline bint _pair_intersects(double ax, double ay, double at,
                                  double ahl, double ahw,
                                  double bx, double by, double bt,
                                  double bhl, double bhw) nogil:
    cdef double ac = cos(at)
    cdef double as_ = sin(at)
    cdef double bc = cos(bt)
    cdef double bs = sin(bt)
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double dist, ra, rb

    dist = fabs(dx * ac + dy * as_)
    ra = ahl
    rb = bhl * fabs(bc * ac + bs * as_) + bhw * fabs(-bs * ac + bc * as_)
    if dist > ra + rb:
        return False
    dist = fabs(dx * -as_ + dy * ac)
    ra = ahw
    rb = bhl * fabs(bc * -as_ + bs * ac) + bhw * fabs(-bs * -as_ + bc * ac)
    if dist > ra + rb:
        return False
    dist = fabs(dx * bc + dy * bs)
    ra = ahl * fabs(ac * bc + as_ * bs) + ahw * fabs(-as_ * bc + ac * bs)
    rb = bhl
    if dist > ra + rb:
        return False
    dist = fabs(dx * -bs + dy * bc)
    ra = ahl * fabs(ac * -bs + as_ * bc) + ahw * fabs(-as_ * -bs + ac * bc)
    rb = bhw
    if dist > ra + rb:
        return False
    return True


def box_intersects(double ax, double ay, double at, double ahl, double ahw,
                   double bx, double by, double bt, double bhl, double bhw):
    """Closed-set overlap test for two oriented rectangles."""
    return bool(_pair_intersects(ax, ay, at, ahl, ahw, bx, by, bt, bhl, bhw))


def first_hit_offsets(ego, actors):
    """First overlap offset per actor against the ego sequence (-1: none)."""
    cdef double[:, ::1] e = np.ascontiguousarray(ego, dtype=np.float64)
    cdef double[:, :, ::1] a = np.ascontiguousarray(actors, dtype=np.float64)
    cdef Py_ssize_t n_actors = a.shape[0]
    cdef Py_ssize_t n_frames = e.shape[0]
    out_arr = np.full(n_actors, -1, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t k, i
    with nogil:
        for k in range(n_actors):
            for i in range(n_frames):
                if _pair_intersects(e[i, 0], e[i, 1], e[i, 2], e[i, 4], e[i, 5],
                                    a[k, i, 0], a[k, i, 1], a[k, i, 2],
                                    a[k, i, 4], a[k, i, 5]):
                    out[k] = i
                    break
    return out_arr


def overlap_mask(ego, box):
    """Per-offset overlap flags between the ego sequence and one box row."""
    cdef double[:, ::1] e = np.ascontiguousarray(ego, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(box, dtype=np.float64)
    cdef Py_ssize_t n_frames = e.shape[0]
    out_arr = np.zeros(n_frames, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n_frames):
            if _pair_intersects(e[i, 0], e[i, 1], e[i, 2], e[i, 4], e[i, 5],
                                b[0], b[1], b[2], b[4], b[5]):
                out[i] = 1
    return out_arr


def kbm_rollout(double x, double y, double theta, double v,
                double accel, double steer, double wheelbase,
                double dt, Py_ssize_t steps):
    """Fixed-control forward-Euler bicycle-model rollout; see the Python twin."""
    out_arr = np.empty((steps + 1, 4), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double tan_steer = tan(steer)
    cdef double r
    cdef Py_ssize_t i
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = theta
    out[0, 3] = v
    with nogil:
        for i in range(steps):
            x = x + v * cos(theta) * dt
            y = y + v * sin(theta) * dt
            theta = theta + v * tan_steer / wheelbase * dt
            r = fmod(theta + M_PI, 2.0 * M_PI)
            if r <= 0.0:
                r += 2.0 * M_PI
            theta = r - M_PI
            v = v + accel * dt
            if v < 0.0:
                v = 0.0
            out[i + 1, 0] = x
            out[i + 1, 1] = y
            out[i + 1, 2] = theta
            out[i + 1, 3] = v
    return out_arr
