"""Ground-truth vehicle motion on a straight multi-lane ring road.

Speeds follow the linear Greenshield speed-density relation plus Gaussian
noise; a trailing vehicle closer than ``FOLLOW_GAP_M`` to its leader copies
the leader's speed.  Internally the fleet is a struct of numpy arrays
(:class:`Fleet`); :func:`spawn` and :func:`step` also accept and return plain
lists of :class:`~fround.model.VehicleState`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .detection import elect_guard_arrays
from .errors import NonMonotonicTime, ParseError
from .model import (
    MPH_TO_MPS,
    Position,
    ReportingPolicy,
    ScenarioConfig,
    VehicleState,
)
from .rng import Purpose, Streams

FOLLOW_GAP_M = 10.0
TRACE_HEADER = ("t_ms", "id", "x_m", "y_m", "speed_mph")


@dataclass(frozen=True, slots=True)
class TrafficParams:
    s_max: float  # free-flow speed, mph
    rho_max: float  # jam density, vehicles/mile/lane

    def __post_init__(self):
        if not (self.s_max > 0 and self.rho_max > 0):
            raise ValueError("s_max and rho_max must be positive")

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> TrafficParams:
        return cls(cfg.free_flow_speed, cfg.jam_density)


def greenshield_speed(rho, params: TrafficParams):
    """Speed (mph) at physical density ``rho`` (vehicles/mile/lane), floored at 0."""
    if np.any(np.asarray(rho) < 0):
        raise ValueError("density must be non-negative")
    speed = params.s_max - (rho / params.rho_max) * params.s_max
    if isinstance(speed, np.ndarray):
        return np.maximum(speed, 0.0)
    return max(speed, 0.0)


def beacon_density(n_vehicles: int, beacons_per_vehicle_per_window: int) -> int:
    """Beacon-message density carried in every beacon: beacons per vehicle times vehicles."""
    if n_vehicles < 0 or beacons_per_vehicle_per_window < 0:
        raise ValueError("counts must be non-negative")
    return beacons_per_vehicle_per_window * n_vehicles


def road_density(n_in_region: int, region_length: float, lanes: int) -> float:
    if region_length <= 0 or lanes < 1:
        raise ValueError("region_length must be > 0 and lanes >= 1")
    return n_in_region / (region_length * lanes)


@dataclass(frozen=True)
class Fleet:
    """Column-oriented vehicle states; row ``i`` is vehicle id ``i``."""

    x: np.ndarray
    y: np.ndarray
    lane: np.ndarray
    speed: np.ndarray
    accel: np.ndarray  # mph/s over the last step
    gap: np.ndarray  # meters to the leader in the same lane
    is_rogue: np.ndarray
    policy: ReportingPolicy

    def __len__(self) -> int:
        return len(self.x)

    def states(self) -> list[VehicleState]:
        honest = ReportingPolicy.honest()
        return [
            VehicleState(
                id=i,
                pos=Position(float(self.x[i]), float(self.y[i])),
                true_speed=float(self.speed[i]),
                lane=int(self.lane[i]),
                is_rogue=bool(self.is_rogue[i]),
                reported_speed_policy=self.policy if self.is_rogue[i] else honest,
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_states(cls, states: Sequence[VehicleState], road_length_m: float) -> Fleet:
        ids = [s.id for s in states]
        if ids != list(range(len(states))):
            raise ValueError("vehicle ids must be dense 0..N-1 in order")
        policies = {s.reported_speed_policy for s in states if s.is_rogue}
        if len(policies) > 1:
            raise ValueError("all rogues must share one reporting policy")
        x = np.array([s.pos.x for s in states], dtype=float)
        lane = np.array([s.lane for s in states], dtype=np.int64)
        _, gap, _ = lane_leaders(x, lane, road_length_m)
        return cls(
            x=x,
            y=np.array([s.pos.y for s in states], dtype=float),
            lane=lane,
            speed=np.array([s.true_speed for s in states], dtype=float),
            accel=np.zeros(len(states)),
            gap=gap,
            is_rogue=np.array([s.is_rogue for s in states], dtype=bool),
            policy=policies.pop() if policies else ReportingPolicy.honest(),
        )


def lane_leaders(x: np.ndarray, lane: np.ndarray, road_length_m: float):
    """Leader index, gap to the leader and a front-to-back processing order.

    Within each lane the leader is the next vehicle ahead on the ring.  A
    vehicle alone in its lane has leader -1 and gap equal to the road length.
    The processing order starts each lane at the vehicle with the largest gap
    ahead, so a follower is always visited after its leader.
    """
    n = len(x)
    leader = np.full(n, -1, dtype=np.int64)
    gap = np.full(n, float(road_length_m))
    order_parts = []
    by_lane = np.lexsort((np.arange(n), x, lane))
    lanes_sorted = lane[by_lane]
    bounds = np.flatnonzero(np.diff(lanes_sorted)) + 1
    for group in np.split(by_lane, bounds):
        if len(group) == 0:
            continue
        if len(group) == 1:
            order_parts.append(group)
            continue
        ahead = np.roll(group, -1)
        leader[group] = ahead
        gap[group] = np.mod(x[ahead] - x[group], road_length_m)
        head = int(np.argmax(gap[group]))
        # from the head backwards: head, its follower, that follower's follower, ...
        walk = (head - np.arange(len(group))) % len(group)
        order_parts.append(group[walk])
    order = np.concatenate(order_parts) if order_parts else np.empty(0, dtype=np.int64)
    # the head never copies: on a fully packed lane that would chase its own tail
    heads = [part[0] for part in order_parts]
    leader_for_follow = leader.copy()
    leader_for_follow[heads] = -1
    return leader_for_follow, gap, order.astype(np.int64)


def _sample_speeds(cfg: ScenarioConfig, n: int, streams: Streams, tick: int) -> np.ndarray:
    params = TrafficParams.from_config(cfg)
    base = greenshield_speed(road_density(n, cfg.road_length, cfg.lanes), params)
    noise = streams.normals(Purpose.SPEED_NOISE, n, counter=tick) * cfg.honest_noise_sigma
    return np.clip(base + noise, cfg.speed_min, cfg.speed_max)


def choose_rogues(x: np.ndarray, y: np.ndarray, k: int, streams: Streams) -> np.ndarray:
    """Flag ``k`` vehicles uniformly at random, never the one nearest the centroid."""
    n = len(x)
    is_rogue = np.zeros(n, dtype=bool)
    if k:
        guard = elect_guard_arrays(x, y)
        candidates = np.delete(np.arange(n), guard)
        chosen = streams.generator(Purpose.ROGUE_CHOICE).choice(candidates, size=k, replace=False)
        is_rogue[chosen] = True
    return is_rogue


def spawn_fleet(cfg: ScenarioConfig, streams: Streams) -> Fleet:
    n = cfg.n_vehicles
    length = cfg.road_length_m
    x = streams.uniforms(Purpose.SPAWN_POSITION, n) * length
    lane = np.minimum(
        (streams.uniforms(Purpose.SPAWN_LANE, n) * cfg.lanes).astype(np.int64), cfg.lanes - 1
    )
    y = lane * cfg.lane_width
    speed = _sample_speeds(cfg, n, streams, tick=0)

    is_rogue = choose_rogues(x, y, cfg.n_rogues, streams)
    _, gap, _ = lane_leaders(x, lane, length)
    return Fleet(x, y, lane, speed, np.zeros(n), gap, is_rogue, cfg.rogue_policy)


def spawn(cfg: ScenarioConfig, rng: Streams) -> list[VehicleState]:
    """Initial vehicle states for ``cfg``; same seed, same list."""
    return spawn_fleet(cfg, rng).states()


def step_fleet(fleet: Fleet, dt: float, cfg: ScenarioConfig, streams: Streams, tick: int) -> Fleet:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    length = cfg.road_length_m
    x = np.mod(fleet.x + fleet.speed * MPH_TO_MPS * (dt / 1000.0), length)
    speed = _sample_speeds(cfg, len(fleet), streams, tick)
    leader, gap, order = lane_leaders(x, fleet.lane, length)
    kernels.car_follow(order, leader, gap, speed, FOLLOW_GAP_M)
    accel = (speed - fleet.speed) / (dt / 1000.0)
    return Fleet(x, fleet.y, fleet.lane, speed, accel, gap, fleet.is_rogue, fleet.policy)


def step(
    states: Sequence[VehicleState],
    dt: float,
    params: TrafficParams,
    rng: Streams,
    cfg: ScenarioConfig,
    tick: int = 1,
) -> list[VehicleState]:
    """Advance ``states`` by ``dt`` milliseconds.

    ``params`` overrides the config's speed-density parameters; ``tick``
    selects the noise block so successive steps draw fresh speeds.
    """
    cfg = cfg.with_(free_flow_speed=params.s_max, jam_density=params.rho_max)
    fleet = Fleet.from_states(states, cfg.road_length_m)
    return step_fleet(fleet, dt, cfg, rng, tick).states()


def reported_speed(state: VehicleState, t: int) -> float:
    return float(_report(state.reported_speed_policy, state.true_speed, t))


def reported_speeds(fleet: Fleet, t: int) -> np.ndarray:
    out = fleet.speed.copy()
    if fleet.is_rogue.any():
        out[fleet.is_rogue] = _report(fleet.policy, fleet.speed[fleet.is_rogue], t)
    return out


def _report(policy: ReportingPolicy, true_speed, t: int):
    if policy.kind == "honest":
        return true_speed
    if policy.kind == "sudden_drop":
        return np.full_like(true_speed, policy.value) if isinstance(true_speed, np.ndarray) else policy.value
    if policy.kind == "gradual_drop":
        return np.maximum(0.0, true_speed - policy.value * t / 1000.0)
    raise ValueError(f"unknown policy {policy.kind!r}")


# -- traces -----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TraceSample:
    t: int
    id: int
    pos: Position
    true_speed: float


@dataclass(frozen=True)
class TraceTimeline:
    samples: tuple[TraceSample, ...] = ()

    def __len__(self) -> int:
        return len(self.samples)

    def vehicle_ids(self) -> list[int]:
        return sorted({s.id for s in self.samples})

    def times(self) -> list[int]:
        return sorted({s.t for s in self.samples})


def _parse_rows(lines: Iterable[str]) -> TraceTimeline:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        return TraceTimeline()
    if tuple(h.strip() for h in header) != TRACE_HEADER:
        raise ParseError(1, f"expected header {','.join(TRACE_HEADER)}")
    last_t: dict[int, int] = {}
    samples = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(TRACE_HEADER):
            raise ParseError(line, f"expected {len(TRACE_HEADER)} fields, got {len(row)}")
        try:
            t, vid = int(row[0]), int(row[1])
            x, y, v = float(row[2]), float(row[3]), float(row[4])
        except ValueError as exc:
            raise ParseError(line, str(exc)) from None
        if vid < 0 or t < 0:
            raise ParseError(line, "t_ms and id must be non-negative")
        if not all(map(math.isfinite, (x, y, v))) or v < 0:
            raise ParseError(line, "positions and speed must be finite, speed >= 0")
        if vid in last_t and t <= last_t[vid]:
            raise NonMonotonicTime(vid, t)
        last_t[vid] = t
        samples.append(TraceSample(t, vid, Position(x, y), v))
    samples.sort(key=lambda s: (s.t, s.id))
    return TraceTimeline(tuple(samples))


def import_trace(path) -> TraceTimeline:
    """Read a ``t_ms,id,x_m,y_m,speed_mph`` CSV trace."""
    with open(path, newline="", encoding="utf-8") as fh:
        return _parse_rows(fh)


def parse_trace(text: str) -> TraceTimeline:
    return _parse_rows(io.StringIO(text))


def format_trace(timeline: TraceTimeline) -> str:
    lines = [",".join(TRACE_HEADER)]
    for s in timeline.samples:
        lines.append(f"{s.t},{s.id},{s.pos.x:.3f},{s.pos.y:.3f},{s.true_speed:.3f}")
    return "\n".join(lines) + "\n"


def export_trace(timeline: TraceTimeline, path) -> None:
    Path(path).write_text(format_trace(timeline), encoding="utf-8", newline="\n")


def generate_trace(cfg: ScenarioConfig) -> TraceTimeline:
    """Record the native mobility model at every beacon tick of ``cfg``."""
    streams = Streams(cfg.seed)
    fleet = spawn_fleet(cfg, streams)
    samples = []
    n_ticks = -(-cfg.duration_ms // cfg.beacon_interval)
    for tick in range(n_ticks):
        t = tick * cfg.beacon_interval
        samples.extend(
            TraceSample(t, i, Position(float(fleet.x[i]), float(fleet.y[i])), float(fleet.speed[i]))
            for i in range(len(fleet))
        )
        fleet = step_fleet(fleet, cfg.beacon_interval, cfg, streams, tick + 1)
    return TraceTimeline(tuple(samples))


class TraceReplay:
    """Sample-and-hold playback of an imported trace as a sequence of fleets.

    The earliest timestamp in the trace is the run start and every vehicle
    must have a sample there.  Ids must be dense ``0..N-1``.  Lanes are
    recovered from ``y`` using ``cfg.lane_width``.
    """

    def __init__(self, timeline: TraceTimeline, cfg: ScenarioConfig, streams: Streams):
        if not timeline.samples:
            raise ValueError("trace is empty")
        ids = timeline.vehicle_ids()
        if ids != list(range(len(ids))):
            raise ValueError("trace vehicle ids must be dense 0..N-1")
        self.cfg = cfg
        self.t0 = timeline.samples[0].t
        per_vehicle: list[list[TraceSample]] = [[] for _ in ids]
        for s in timeline.samples:
            per_vehicle[s.id].append(s)
        missing = [i for i, rows in enumerate(per_vehicle) if rows[0].t != self.t0]
        if missing:
            raise ValueError(f"vehicles {missing[:5]} have no sample at the trace start")
        self._times = [np.array([r.t for r in rows]) for rows in per_vehicle]
        self._x = [np.array([r.pos.x for r in rows]) for rows in per_vehicle]
        self._y = [np.array([r.pos.y for r in rows]) for rows in per_vehicle]
        self._v = [np.array([r.true_speed for r in rows]) for rows in per_vehicle]
        x, y, _ = self._sample(0)
        n = len(ids)
        k = min(int(math.floor(cfg.rogue_fraction * n + 0.5)), n - 1)
        self.is_rogue = choose_rogues(x, y, k, streams)

    def __len__(self) -> int:
        return len(self._times)

    def _sample(self, t: int):
        n = len(self)
        x, y, v = np.empty(n), np.empty(n), np.empty(n)
        for i in range(n):
            j = int(np.searchsorted(self._times[i], self.t0 + t, side="right")) - 1
            x[i], y[i], v[i] = self._x[i][j], self._y[i][j], self._v[i][j]
        return x, y, v

    def fleet_at(self, t: int, previous: Fleet | None = None) -> Fleet:
        x, y, v = self._sample(t)
        width = self.cfg.lane_width
        lane = np.zeros(len(x), dtype=np.int64) if width == 0 else np.rint(y / width).astype(np.int64)
        _, gap, _ = lane_leaders(x, lane, self.cfg.road_length_m)
        if previous is None:
            accel = np.zeros(len(x))
        else:
            accel = (v - previous.speed) / (self.cfg.beacon_interval / 1000.0)
        return Fleet(x, y, lane, v, accel, gap, self.is_rogue, self.cfg.rogue_policy)
