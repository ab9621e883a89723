"""Beacon-level discrete-event simulation.

Every ``beacon_interval`` ms each vehicle broadcasts one beacon.  Every other
vehicle within ``tx_range`` is a candidate receiver and hears it unless an
independent Bernoulli loss draw drops it.  Beacons are processed in the total
order (t, sender, receiver).

Detection windows: the guard for a window is elected from the positions at
the window's first tick.  At the window's closing boundary the guard judges
the latest beacon it heard from each sender; the rogue list rides on the
guard's beacon at that boundary tick.  Receivers of that list ignore later
beacons from the listed ids; the guard's own detection input is never
filtered, so every sender is re-judged each window.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .detection import WindowSample, detect_window, elect_guard_arrays
from .errors import InsufficientVehicles
from .mobility import Fleet, TraceReplay, TraceTimeline, beacon_density, reported_speeds, spawn_fleet, step_fleet
from .model import (
    BASE_BEACON_BYTES,
    BeaconMessage,
    DetectionReport,
    Position,
    ScenarioConfig,
    VehicleState,
    validate_config,
)
from .rng import Purpose, Streams

log = logging.getLogger(__name__)

EVENT_HEADER = "t_ms,sender,receiver,delivered,reported_speed_mph,bytes"


@dataclass
class ChannelStats:
    sent: int = 0
    delivered: int = 0
    lost: int = 0
    bytes_delivered: int = 0
    overhead_bytes: int = 0

    def record(self, msg: BeaconMessage, candidates: int, received: int) -> None:
        self.sent += 1
        self.delivered += received
        self.lost += candidates - received
        self.bytes_delivered += received * msg.size
        self.overhead_bytes += received * (msg.size - BASE_BEACON_BYTES)


def in_range(a: Position, b: Position, tx_range: float) -> bool:
    dx = a.x - b.x
    dy = a.y - b.y
    return dx * dx + dy * dy <= tx_range * tx_range


def broadcast(
    sender: VehicleState,
    msg: BeaconMessage,
    all_states: Sequence[VehicleState],
    loss_prob: float,
    rng: np.random.Generator,
    tx_range: float = 500.0,
    stats: ChannelStats | None = None,
) -> frozenset[int]:
    """Deliver ``msg`` to every other in-range vehicle that survives the loss draw.

    One uniform is drawn per entry of ``all_states`` (in list order), so the
    draw a receiver sees does not depend on which others are in range.
    """
    if msg.sender != sender.id:
        raise ValueError("message sender does not match the broadcasting vehicle")
    x = np.array([s.pos.x for s in all_states], dtype=float)
    y = np.array([s.pos.y for s in all_states], dtype=float)
    ids = [s.id for s in all_states]
    row = ids.index(sender.id)
    u = rng.random(len(all_states))
    idx, ok = kernels.deliver_row(row, x, y, tx_range, loss_prob, u)
    if stats is not None:
        stats.record(msg, len(idx), int(ok.sum()))
    return frozenset(ids[i] for i, o in zip(idx.tolist(), ok.tolist()) if o)


@dataclass(frozen=True, slots=True)
class Event:
    t: int
    sender: int
    receiver: int
    beacon: BeaconMessage
    delivered: bool


@dataclass
class EventLog:
    """Columnar record of every (beacon, candidate receiver) pair."""

    t: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    sender: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    receiver: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    delivered: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    beacon_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    beacons: list[BeaconMessage] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for t, s, r, d, b in zip(
            self.t.tolist(), self.sender.tolist(), self.receiver.tolist(),
            self.delivered.tolist(), self.beacon_index.tolist(),
        ):
            yield Event(t, s, r, self.beacons[b], d)

    def stats(self) -> ChannelStats:
        """Channel counters recomputed from the log alone."""
        sizes = np.array([b.size for b in self.beacons], dtype=np.int64)
        per_event = sizes[self.beacon_index] if len(self) else np.empty(0, dtype=np.int64)
        got = self.delivered
        return ChannelStats(
            sent=len(self.beacons),
            delivered=int(got.sum()),
            lost=int((~got).sum()),
            bytes_delivered=int(per_event[got].sum()),
            overhead_bytes=int((per_event[got] - BASE_BEACON_BYTES).sum()),
        )

    def to_csv(self) -> str:
        lines = [EVENT_HEADER]
        speeds = [f"{b.reported_speed:.3f}" for b in self.beacons]
        sizes = [b.size for b in self.beacons]
        for t, s, r, d, b in zip(
            self.t.tolist(), self.sender.tolist(), self.receiver.tolist(),
            self.delivered.tolist(), self.beacon_index.tolist(),
        ):
            lines.append(f"{t},{s},{r},{int(d)},{speeds[b]},{sizes[b]}")
        return "\n".join(lines) + "\n"


class _EventRecorder:
    def __init__(self):
        self.parts: list[tuple] = []
        self.beacons: list[BeaconMessage] = []

    def add(self, msg: BeaconMessage, idx: np.ndarray, ok: np.ndarray) -> None:
        b = len(self.beacons)
        self.beacons.append(msg)
        m = len(idx)
        self.parts.append((msg.t, msg.sender, idx, ok, b, m))

    def build(self) -> EventLog:
        if not self.parts:
            return EventLog(beacons=self.beacons)
        counts = [p[5] for p in self.parts]
        return EventLog(
            t=np.repeat(np.array([p[0] for p in self.parts], dtype=np.int64), counts),
            sender=np.repeat(np.array([p[1] for p in self.parts], dtype=np.int64), counts),
            receiver=np.concatenate([p[2] for p in self.parts]).astype(np.int64),
            delivered=np.concatenate([p[3] for p in self.parts]).astype(bool),
            beacon_index=np.repeat(np.array([p[4] for p in self.parts], dtype=np.int64), counts),
            beacons=self.beacons,
        )


@dataclass
class RunResult:
    config: ScenarioConfig
    events: EventLog
    stats: ChannelStats
    reports: list[DetectionReport]
    rogues: frozenset[int]
    n_vehicles: int = 0
    guards: list[int] = field(default_factory=list)
    skipped_windows: int = 0
    ignored_beacons: int = 0

    def __iter__(self):
        # unpacks as (events, stats, reports, rogues)
        return iter((self.events, self.stats, self.reports, self.rogues))


def run(
    cfg: ScenarioConfig,
    *,
    record_events: bool = False,
    trace: TraceTimeline | None = None,
) -> RunResult:
    """Simulate ``cfg.duration`` seconds and run detection every window.

    With ``trace`` the vehicles replay the imported trace instead of the
    native mobility model; its vehicle count overrides ``cfg.n_vehicles``.
    A trailing partial window is simulated but not judged.  Windows where
    the guard heard nobody produce no report and are counted in
    ``skipped_windows``.
    """
    cfg = validate_config(cfg)
    streams = Streams(cfg.seed)
    bi = cfg.beacon_interval
    n_ticks = -(-cfg.duration_ms // bi)

    replay = None
    if trace is not None:
        replay = TraceReplay(trace, cfg, streams)
        fleet = replay.fleet_at(0)
        if len(fleet) < 2:
            raise InsufficientVehicles("trace has fewer than two vehicles")
    else:
        fleet = spawn_fleet(cfg, streams)
    n = len(fleet)
    truth = frozenset(np.flatnonzero(fleet.is_rogue).tolist())
    stats = ChannelStats()
    recorder = _EventRecorder() if record_events else None
    result = RunResult(cfg, EventLog(), stats, [], truth, n_vehicles=n)
    if n_ticks == 0:
        return result

    per_window = cfg.beacons_per_window
    loss = cfg.effective_loss_prob
    ignore: np.ndarray | None = None
    guard = elect_guard_arrays(fleet.x, fleet.y)
    result.guards.append(guard)
    heard: dict[int, BeaconMessage] = {}
    announcer, pending = -1, None

    def close_window(window_index: int):
        nonlocal announcer, pending
        sample = WindowSample(guard, window_index, heard)
        if len(sample) == 0:
            result.skipped_windows += 1
            log.debug("window %d: guard %d heard nobody, skipped", window_index, guard)
            announcer, pending = -1, None
            return
        report = detect_window(sample, cfg.sigma_multiplier, cfg.sigma_floor)
        result.reports.append(report)
        announcer, pending = guard, report.rogue_ids

    for tick in range(n_ticks):
        t = tick * bi
        if tick and tick % per_window == 0:
            close_window(tick // per_window - 1)
            if cfg.guard_reelect_every_window:
                guard = elect_guard_arrays(fleet.x, fleet.y)
            result.guards.append(guard)
            heard = {}
        speeds = reported_speeds(fleet, t)
        braking = fleet.accel < 0
        for s in range(n):
            u = streams.uniforms(Purpose.LOSS, n, key_id=s, counter=tick)
            idx, ok = kernels.deliver_row(s, fleet.x, fleet.y, cfg.tx_range, loss, u)
            rogue_list = rlt = None
            if s == announcer and pending is not None:
                rogue_list, rlt = pending, int(bool(pending))
            msg = BeaconMessage(
                sender=s,
                t=t,
                reported_speed=float(speeds[s]),
                pos=Position(float(fleet.x[s]), float(fleet.y[s])),
                density=float(beacon_density(len(idx) + 1, per_window)),
                accel=float(fleet.accel[s]),
                braking=bool(braking[s]),
                gap=float(fleet.gap[s]),
                rogue_list=rogue_list,
                rlt_flag=rlt,
            )
            n_ok = int(ok.sum())
            stats.record(msg, len(idx), n_ok)
            if recorder is not None:
                recorder.add(msg, idx, ok)
            if n_ok == 0:
                continue
            pos = int(np.searchsorted(idx, guard))
            if pos < len(idx) and idx[pos] == guard and ok[pos]:
                heard[s] = msg
            if ignore is not None or rogue_list:
                got = idx[ok.astype(bool)]
                if ignore is not None:
                    result.ignored_beacons += int(ignore[got, s].sum())
                if rogue_list:
                    if ignore is None:
                        ignore = np.zeros((n, n), dtype=bool)
                    ignore[np.ix_(got, np.array(rogue_list, dtype=np.int64))] = True
        announcer, pending = -1, None
        if replay is not None:
            fleet = replay.fleet_at(t + bi, fleet)
        else:
            fleet = step_fleet(fleet, bi, cfg, streams, tick + 1)

    if n_ticks % per_window == 0:
        close_window(n_ticks // per_window - 1)
    if recorder is not None:
        result.events = recorder.build()
    return result
