"""Discrete-event VANET simulation with guard-based rogue node detection."""

from .detection import centroid, classify, detect_window, elect_guard, score
from .kernels import BACKEND
from .metrics import RunMetrics, aggregate, system_failure_probability
from .model import BeaconMessage, ScenarioConfig, validate_config
from .netsim import run

__all__ = [
    "BACKEND",
    "BeaconMessage",
    "RunMetrics",
    "ScenarioConfig",
    "aggregate",
    "centroid",
    "classify",
    "detect_window",
    "elect_guard",
    "run",
    "score",
    "system_failure_probability",
    "validate_config",
]

__version__ = "0.1.0"
