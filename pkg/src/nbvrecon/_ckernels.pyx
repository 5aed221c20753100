# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled visibility kernel; same semantics as ``_pykernels.segments_clear``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, fmax, fmin
from libc.stdlib cimport labs

cnp.import_array()

cdef double OVERLAP_EPS = 1e-12


cdef inline bint _blocked(double cx, double cy, double dx, double dy,
                          double x_lo, double y_lo, double h) nogil:
    cdef double ax, bx, ay, by, t_in, t_out
    if dx == 0.0:
        if not (cx > x_lo and cx < x_lo + h):
            return False
        if dy == 0.0:
            t_in, t_out = 0.0, 1.0
        else:
            ay = (y_lo - cy) / dy
            by = (y_lo + h - cy) / dy
            t_in, t_out = fmin(ay, by), fmax(ay, by)
    elif dy == 0.0:
        if not (cy > y_lo and cy < y_lo + h):
            return False
        ax = (x_lo - cx) / dx
        bx = (x_lo + h - cx) / dx
        t_in, t_out = fmin(ax, bx), fmax(ax, bx)
    else:
        ax = (x_lo - cx) / dx
        bx = (x_lo + h - cx) / dx
        ay = (y_lo - cy) / dy
        by = (y_lo + h - cy) / dy
        t_in = fmax(fmin(ax, bx), fmin(ay, by))
        t_out = fmin(fmax(ax, bx), fmax(ay, by))
    return fmin(t_out, 1.0) - fmax(t_in, 0.0) > OVERLAP_EPS


def segments_clear(double cx, double cy, targets, target_pix, occluders, double h, long neighborhood=1):
    """For each target, True when the segment from the camera reaches it unobstructed."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tg = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 2)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] tp = np.ascontiguousarray(target_pix, dtype=np.int64).reshape(-1, 2)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] oc = np.ascontiguousarray(occluders, dtype=np.int64).reshape(-1, 2)
    cdef Py_ssize_t m = tg.shape[0], k = oc.shape[0], i, j
    out = np.ones(m, dtype=bool)
    cdef cnp.npy_bool[:] res = out
    cdef double dx, dy
    with nogil:
        for i in range(m):
            dx = tg[i, 0] - cx
            dy = tg[i, 1] - cy
            for j in range(k):
                if labs(oc[j, 0] - tp[i, 0]) <= neighborhood and labs(oc[j, 1] - tp[i, 1]) <= neighborhood:
                    continue
                if _blocked(cx, cy, dx, dy, oc[j, 0] * h, oc[j, 1] * h, h):
                    res[i] = False
                    break
    return out
