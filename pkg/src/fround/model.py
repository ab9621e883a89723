"""Domain types shared by the simulator, the detector and the metrics engine.

Speeds are miles/hour everywhere, positions are meters, times are integer
milliseconds since the start of a run.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

from .errors import InvalidConfig

METERS_PER_MILE = 1609.344
MPH_TO_MPS = METERS_PER_MILE / 3600.0

BASE_BEACON_BYTES = 256
ROGUE_ENTRY_BYTES = 8  # 4-byte id + 4-byte framing


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float


@dataclass(frozen=True, slots=True)
class ReportingPolicy:
    """How a vehicle turns its true speed into the speed it broadcasts.

    ``kind`` is one of ``honest``, ``sudden_drop`` (``value`` is the reported
    target speed in mph) or ``gradual_drop`` (``value`` is the drop rate in
    mph per second since the start of the run).
    """

    kind: str = "honest"
    value: float = 0.0

    KINDS = ("honest", "sudden_drop", "gradual_drop")

    @classmethod
    def honest(cls) -> ReportingPolicy:
        return cls("honest", 0.0)

    @classmethod
    def sudden_drop(cls, target: float = 10.0) -> ReportingPolicy:
        return cls("sudden_drop", float(target))

    @classmethod
    def gradual_drop(cls, rate: float) -> ReportingPolicy:
        return cls("gradual_drop", float(rate))

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "honest":
            return {"kind": "honest"}
        key = "target" if self.kind == "sudden_drop" else "rate"
        return {"kind": self.kind, key: self.value}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ReportingPolicy:
        if not isinstance(data, Mapping) or "kind" not in data:
            raise InvalidConfig("rogue_policy", "expected an object with a 'kind' key")
        kind = data["kind"]
        if kind == "honest":
            extra = set(data) - {"kind"}
            value = 0.0
        elif kind == "sudden_drop":
            extra = set(data) - {"kind", "target"}
            value = data.get("target", 10.0)
        elif kind == "gradual_drop":
            extra = set(data) - {"kind", "rate"}
            if "rate" not in data:
                raise InvalidConfig("rogue_policy", "gradual_drop needs 'rate'")
            value = data["rate"]
        else:
            raise InvalidConfig("rogue_policy", f"unknown kind {kind!r}")
        if extra:
            raise InvalidConfig("rogue_policy", f"unexpected keys {sorted(extra)}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidConfig("rogue_policy", "parameter must be a number")
        return cls(kind, float(value))


@dataclass(frozen=True, slots=True)
class VehicleState:
    id: int
    pos: Position
    true_speed: float
    lane: int
    is_rogue: bool = False
    reported_speed_policy: ReportingPolicy = ReportingPolicy()


@dataclass(frozen=True, slots=True)
class BeaconMessage:
    sender: int
    t: int
    reported_speed: float
    pos: Position
    density: float
    accel: float = 0.0
    braking: bool = False
    gap: float = 0.0
    rogue_list: tuple[int, ...] | None = None
    rlt_flag: int | None = None

    @property
    def size(self) -> int:
        extra = len(self.rogue_list) if self.rogue_list else 0
        return BASE_BEACON_BYTES + ROGUE_ENTRY_BYTES * extra


class Decision(str, enum.Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


@dataclass(frozen=True)
class DetectionReport:
    window_index: int
    guard: int
    s_avg: float
    rho_avg: float
    sigma: float
    decisions: Mapping[int, Decision]
    rogue_ids: tuple[int, ...]
    processing_time: float = 0.0  # microseconds

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "window_index": self.window_index,
            "guard": self.guard,
            "s_avg": self.s_avg,
            "rho_avg": self.rho_avg,
            "sigma": self.sigma,
            "decisions": {str(k): v.value for k, v in sorted(self.decisions.items())},
            "rogue_ids": list(self.rogue_ids),
        }
        if timing:
            out["processing_time_us"] = self.processing_time
        return out


@dataclass(frozen=True, slots=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one experiment.

    Defaults follow the evaluation setup: a 3-mile two-lane road, 30-65 mph
    speeds, 256-byte beacons every 100 ms and a 500 m radio range.
    ``free_flow_speed`` and ``jam_density`` parameterise the linear
    speed-density relation and are not clamped to ``speed_max``; generated
    speeds are.
    """

    road_length: float = 3.0  # miles
    lanes: int = 2
    n_vehicles: int = 500
    speed_min: float = 30.0
    speed_max: float = 65.0
    rogue_fraction: float = 0.0
    rogue_policy: ReportingPolicy = field(default_factory=ReportingPolicy.sudden_drop)
    beacon_interval: int = 100  # ms
    tx_range: float = 500.0  # m
    loss_prob: float = 0.0
    loss_prob_per_1000_vehicles: float = 0.0
    duration: float = 2.0  # s
    detection_window: int = 1000  # ms
    sigma_multiplier: float = 1.0
    sigma_floor: float = 0.1  # mph
    honest_noise_sigma: float = 2.0  # mph
    free_flow_speed: float = 75.0  # mph
    jam_density: float = 190.0  # vehicles / mile / lane
    lane_width: float = 3.7  # m
    guard_reelect_every_window: bool = True
    seed: int = 0

    @property
    def road_length_m(self) -> float:
        return self.road_length * METERS_PER_MILE

    @property
    def duration_ms(self) -> int:
        return int(round(self.duration * 1000.0))

    @property
    def n_rogues(self) -> int:
        return int(math.floor(self.rogue_fraction * self.n_vehicles + 0.5))

    @property
    def effective_loss_prob(self) -> float:
        p = self.loss_prob + self.loss_prob_per_1000_vehicles * self.n_vehicles / 1000.0
        return min(p, math.nextafter(1.0, 0.0))

    @property
    def beacons_per_window(self) -> int:
        return self.detection_window // self.beacon_interval

    def with_(self, **changes: Any) -> ScenarioConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.to_dict() if isinstance(value, ReportingPolicy) else value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ScenarioConfig:
        if not isinstance(data, Mapping):
            raise InvalidConfig("<root>", "expected a JSON object")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise InvalidConfig(unknown[0], "unknown field")
        kwargs: dict[str, Any] = {}
        for name, value in data.items():
            if name == "rogue_policy":
                kwargs[name] = ReportingPolicy.from_dict(value)
                continue
            default = getattr(cls(), name)
            kwargs[name] = _coerce(name, value, type(default))
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> ScenarioConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(
                "<json>", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from None
        return cls.from_dict(data)


def _coerce(name: str, value: Any, kind: type) -> Any:
    if kind is bool:
        if not isinstance(value, bool):
            raise InvalidConfig(name, "expected true or false")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfig(name, f"expected a number, got {type(value).__name__}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise InvalidConfig(name, "expected an integer")
        return int(value)
    return float(value)


ValidatedConfig = ScenarioConfig


def validate_config(cfg: ScenarioConfig) -> ValidatedConfig:
    """Return ``cfg`` unchanged if it describes a runnable scenario.

    Raises InvalidConfig naming the first offending field.
    """
    def check(ok: bool, name: str, message: str) -> None:
        if not ok:
            raise InvalidConfig(name, message)

    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, float):
            check(math.isfinite(value), f.name, "must be finite")

    check(cfg.n_vehicles >= 2, "n_vehicles", "at least two vehicles are required for detection")
    check(cfg.lanes >= 1, "lanes", "must be >= 1")
    check(cfg.road_length > 0, "road_length", "must be > 0")
    check(cfg.speed_min >= 0, "speed_min", "must be >= 0")
    check(cfg.speed_min <= cfg.speed_max, "speed_min", "must not exceed speed_max")
    check(cfg.free_flow_speed > 0, "free_flow_speed", "must be > 0")
    check(cfg.jam_density > 0, "jam_density", "must be > 0")
    check(0.0 <= cfg.rogue_fraction <= 1.0, "rogue_fraction", "must lie in [0, 1]")
    check(
        cfg.n_rogues <= cfg.n_vehicles - 1,
        "rogue_fraction",
        "leaves no honest vehicle to act as guard",
    )
    check(cfg.rogue_policy.kind in ReportingPolicy.KINDS, "rogue_policy", "unknown kind")
    check(cfg.rogue_policy.value >= 0, "rogue_policy", "parameter must be >= 0")
    check(cfg.beacon_interval > 0, "beacon_interval", "must be > 0")
    check(cfg.detection_window > 0, "detection_window", "must be > 0")
    check(
        cfg.detection_window % cfg.beacon_interval == 0,
        "detection_window",
        f"must be a multiple of beacon_interval ({cfg.beacon_interval} ms)",
    )
    check(cfg.tx_range >= 0, "tx_range", "must be >= 0")
    check(0.0 <= cfg.loss_prob < 1.0, "loss_prob", "must lie in [0, 1)")
    check(cfg.loss_prob_per_1000_vehicles >= 0, "loss_prob_per_1000_vehicles", "must be >= 0")
    check(cfg.duration >= 0, "duration", "must be >= 0")
    check(cfg.sigma_multiplier > 0, "sigma_multiplier", "must be > 0")
    check(cfg.sigma_floor > 0, "sigma_floor", "must be > 0")
    check(cfg.honest_noise_sigma >= 0, "honest_noise_sigma", "must be >= 0")
    check(cfg.lane_width >= 0, "lane_width", "must be >= 0")
    check(0 <= cfg.seed < 2**64, "seed", "must be an unsigned 64-bit integer")
    return cfg
