"""Pure-Python versions of the compiled inner loops.

Summation order matches the compiled code element for element, so both
backends produce bit-identical results.
"""

import math

import numpy as np


def window_stats(speeds, densities, k, sigma_floor):
    s = speeds.tolist()
    r = densities.tolist()
    n = len(s)
    if n == 0:
        raise ValueError("empty sample")
    s_sum = 0.0
    r_sum = 0.0
    for i in range(n):
        s_sum += s[i]
        r_sum += r[i]
    s_avg = s_sum / n
    rho_avg = r_sum / n
    var = 0.0
    for v in s:
        dev = s_avg - v
        var += dev * dev
    sigma = math.sqrt(var / n)
    if sigma < sigma_floor:
        sigma = sigma_floor
    bound = k * sigma
    rejected = np.fromiter((0 if abs(v - s_avg) <= bound else 1 for v in s), dtype=np.uint8, count=n)
    return s_avg, rho_avg, sigma, rejected


def deliver_row(sender, x, y, tx_range, loss_prob, u):
    dx = x - x[sender]
    dy = y - y[sender]
    in_range = dx * dx + dy * dy <= tx_range * tx_range
    in_range[sender] = False
    idx = np.flatnonzero(in_range).astype(np.int64)
    ok = (u[idx] >= loss_prob).astype(np.uint8)
    return idx, ok


def car_follow(order, leader, gap, speeds, max_gap):
    for j in order.tolist():
        lead = leader[j]
        if lead >= 0 and gap[j] <= max_gap:
            speeds[j] = speeds[lead]
