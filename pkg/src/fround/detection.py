"""Guard election and per-window rogue node detection.

The guard is the vehicle nearest the centroid of all positions.  Each
detection window it takes the latest beacon from every sender it heard,
computes the mean reported speed and its population standard deviation, and
rejects every sender whose speed falls outside ``mean +/- k * sigma``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import EmptyInput, InsufficientVehicles
from .model import (
    BeaconMessage,
    ConfusionCounts,
    Decision,
    DetectionReport,
    Position,
    VehicleState,
)


def centroid(positions: Sequence[Position]) -> Position:
    if not positions:
        raise EmptyInput("centroid of an empty position list")
    xs = np.fromiter((p.x for p in positions), dtype=float, count=len(positions))
    ys = np.fromiter((p.y for p in positions), dtype=float, count=len(positions))
    return Position(float(xs.mean()), float(ys.mean()))


def elect_guard_arrays(x: np.ndarray, y: np.ndarray, ids: np.ndarray | None = None) -> int:
    """Index of the point nearest the centroid of ``(x, y)``.

    Ties go to the smallest id (``ids`` defaults to the row index).  Points
    within float noise of the minimum are re-ranked in exact rational
    arithmetic, so ties are decided on the true distances.
    """
    n = len(x)
    if n == 0:
        raise EmptyInput("no positions")
    if ids is None:
        ids = np.arange(n)
    dx = x - x.mean()
    dy = y - y.mean()
    d2 = dx * dx + dy * dy
    tol = 1e-9 * (float(np.max(x * x)) + float(np.max(y * y)) + 1.0)
    near = np.flatnonzero(d2 <= d2.min() + tol)
    if len(near) == 1:
        return int(near[0])
    # n * |p - c| = |n p - sum|, compared exactly
    sx = sum(map(Fraction, x.tolist()))
    sy = sum(map(Fraction, y.tolist()))
    best = min(
        near.tolist(),
        key=lambda i: ((n * Fraction(x[i]) - sx) ** 2 + (n * Fraction(y[i]) - sy) ** 2, ids[i]),
    )
    return int(best)


def elect_guard(states: Sequence[VehicleState]) -> int:
    if len(states) < 2:
        raise InsufficientVehicles(f"guard election needs at least 2 vehicles, got {len(states)}")
    x = np.array([s.pos.x for s in states], dtype=float)
    y = np.array([s.pos.y for s in states], dtype=float)
    ids = np.array([s.id for s in states], dtype=np.int64)
    return int(ids[elect_guard_arrays(x, y, ids)])


@dataclass(frozen=True)
class WindowSample:
    """Latest beacon per sender heard by ``guard`` during one window."""

    guard: int
    window_index: int
    beacons: Mapping[int, BeaconMessage] = field(default_factory=dict)

    def __post_init__(self):
        if self.guard in self.beacons:
            raise ValueError("the guard's own beacon cannot be part of its sample")
        for sender, msg in self.beacons.items():
            if msg.sender != sender:
                raise ValueError(f"beacon from {msg.sender} filed under sender {sender}")

    @classmethod
    def from_beacons(cls, guard: int, window_index: int, beacons: Iterable[BeaconMessage]) -> WindowSample:
        latest: dict[int, BeaconMessage] = {}
        for msg in beacons:
            if msg.sender == guard:
                continue
            prev = latest.get(msg.sender)
            if prev is None or msg.t >= prev.t:
                latest[msg.sender] = msg
        return cls(guard, window_index, latest)

    def __len__(self) -> int:
        return len(self.beacons)

    def arrays(self):
        senders = np.array(sorted(self.beacons), dtype=np.int64)
        speeds = np.array([self.beacons[s].reported_speed for s in senders.tolist()], dtype=float)
        dens = np.array([self.beacons[s].density for s in senders.tolist()], dtype=float)
        return senders, speeds, dens


def window_averages(sample: WindowSample) -> tuple[float, float]:
    if not sample.beacons:
        raise EmptyInput("empty window sample")
    _, speeds, dens = sample.arrays()
    s_sum = 0.0
    r_sum = 0.0
    for s, r in zip(speeds.tolist(), dens.tolist()):
        s_sum += s
        r_sum += r
    return s_sum / len(speeds), r_sum / len(speeds)


def std_dev(sample: WindowSample, s_avg: float, sigma_floor: float = 0.1) -> float:
    """Population standard deviation of reported speeds around ``s_avg``, floored."""
    if not sample.beacons:
        raise EmptyInput("empty window sample")
    _, speeds, _ = sample.arrays()
    var = 0.0
    for v in speeds.tolist():
        dev = s_avg - v
        var += dev * dev
    return max(math.sqrt(var / len(speeds)), sigma_floor)


def classify(reported: float, s_avg: float, sigma: float, k: float = 1.0) -> int:
    """0 if ``reported`` lies in ``[s_avg - k*sigma, s_avg + k*sigma]``, else 1."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return 0 if abs(reported - s_avg) <= k * sigma else 1


def _exact_decisions(speeds: np.ndarray, k: float, sigma_floor: float, rows: list[int]):
    # Rational re-check for speeds sitting on the acceptance boundary, where
    # the rounded mean and sigma could tip the comparison either way.
    xs = [Fraction(v) for v in speeds.tolist()]
    n = len(xs)
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / n
    bound2 = Fraction(k) ** 2 * max(var, Fraction(sigma_floor) ** 2)
    return [(i, int((xs[i] - mean) ** 2 > bound2)) for i in rows]


def detect_window(sample: WindowSample, k: float = 1.0, sigma_floor: float = 0.1) -> DetectionReport:
    """Judge every sender in ``sample``.

    The guard plus its senders must make at least two vehicles, so a sample
    with no senders raises InsufficientVehicles.
    """
    start = time.perf_counter_ns()
    if len(sample) < 1:
        raise InsufficientVehicles("guard heard no other vehicle in this window")
    senders, speeds, dens = sample.arrays()
    s_avg, rho_avg, sigma, rejected = kernels.window_stats(speeds, dens, k, sigma_floor)
    ids = senders.tolist()
    flags = rejected.tolist()
    bound = k * sigma
    edge = np.flatnonzero(np.abs(np.abs(speeds - s_avg) - bound) <= 1e-9 * (bound + abs(s_avg) + 1.0))
    if len(edge):
        for i, f in _exact_decisions(speeds, k, sigma_floor, edge.tolist()):
            flags[i] = f
    decisions = {i: Decision.REJECTED if f else Decision.ACCEPTED for i, f in zip(ids, flags)}
    rogue_ids = tuple(i for i, f in zip(ids, flags) if f)
    elapsed_us = (time.perf_counter_ns() - start) / 1000.0
    return DetectionReport(
        window_index=sample.window_index,
        guard=sample.guard,
        s_avg=s_avg,
        rho_avg=rho_avg,
        sigma=sigma,
        decisions=decisions,
        rogue_ids=rogue_ids,
        processing_time=elapsed_us,
    )


def score(
    reports: Sequence[DetectionReport],
    truth: Iterable[int],
    vehicles: Iterable[int] | None = None,
) -> ConfusionCounts:
    """Confusion counts over a whole run; each vehicle counts once.

    A vehicle is flagged if any window rejected it.  Without ``vehicles`` the
    population is every vehicle judged at least once; with it, vehicles that
    only ever acted as guard are left out.
    """
    truth = set(truth)
    judged: set[int] = set()
    flagged: set[int] = set()
    guards: set[int] = set()
    for r in reports:
        judged.update(r.decisions)
        flagged.update(r.rogue_ids)
        guards.add(r.guard)
    if vehicles is None:
        population = judged
    else:
        population = set(vehicles) - (guards - judged)
    tp = fp = tn = fn = 0
    for v in population:
        if v in flagged:
            if v in truth:
                tp += 1
            else:
                fp += 1
        elif v in truth:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
