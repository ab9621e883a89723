# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  Must stay bit-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def window_stats(const double[::1] speeds, const double[::1] densities,
                 double k, double sigma_floor):
    cdef Py_ssize_t n = speeds.shape[0], i
    cdef double s_sum = 0.0, r_sum = 0.0, s_avg, rho_avg, dev, var = 0.0, sigma, bound
    if n == 0:
        raise ValueError("empty sample")
    for i in range(n):
        s_sum += speeds[i]
        r_sum += densities[i]
    s_avg = s_sum / n
    rho_avg = r_sum / n
    for i in range(n):
        dev = s_avg - speeds[i]
        var += dev * dev
    sigma = sqrt(var / n)
    if sigma < sigma_floor:
        sigma = sigma_floor
    bound = k * sigma
    rejected = np.empty(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] rej = rejected
    for i in range(n):
        rej[i] = 0 if fabs(speeds[i] - s_avg) <= bound else 1
    return s_avg, rho_avg, sigma, rejected


def deliver_row(Py_ssize_t sender, const double[::1] x, const double[::1] y,
                double tx_range, double loss_prob, const double[::1] u):
    cdef Py_ssize_t n = x.shape[0], i, m = 0
    cdef double r2 = tx_range * tx_range, dx, dy
    cdef double sx = x[sender], sy = y[sender]
    idx = np.empty(n, dtype=np.int64)
    ok = np.empty(n, dtype=np.uint8)
    cdef cnp.int64_t[::1] idx_v = idx
    cdef cnp.uint8_t[::1] ok_v = ok
    for i in range(n):
        if i == sender:
            continue
        dx = x[i] - sx
        dy = y[i] - sy
        if dx * dx + dy * dy <= r2:
            idx_v[m] = i
            ok_v[m] = 1 if u[i] >= loss_prob else 0
            m += 1
    return idx[:m], ok[:m]


def car_follow(const cnp.int64_t[::1] order, const cnp.int64_t[::1] leader,
               const double[::1] gap, double[::1] speeds, double max_gap):
    cdef Py_ssize_t i, j
    for i in range(order.shape[0]):
        j = order[i]
        if leader[j] >= 0 and gap[j] <= max_gap:
            speeds[j] = speeds[leader[j]]
