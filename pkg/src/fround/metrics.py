"""Evaluation metrics for finished runs.

CSV outputs are split in two: ``metrics.csv`` holds only quantities that are
a deterministic function of (config, seed); wall-clock detection timings go
to ``timing.csv`` so that the former can be compared byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .detection import score
from .errors import InvalidProbability, ZeroDuration
from .model import ConfusionCounts

METRICS_FIELDS = (
    "n_vehicles", "rogue_fraction", "seed",
    "tpr", "fpr", "plr", "avg_throughput", "overhead_bytes",
    "tp", "fp", "tn", "fn", "windows",
)
TIMING_FIELDS = ("n_vehicles", "rogue_fraction", "seed", "windows", "mean_processing_time_us")

_DIRECT_SUM_MAX_N = 64


def tpr(c: ConfusionCounts) -> float:
    total = c.tp + c.fn
    return 1.0 if total == 0 else c.tp / total


def fpr(c: ConfusionCounts) -> float:
    total = c.fp + c.tn
    return 0.0 if total == 0 else c.fp / total


def plr(stats) -> float:
    attempts = stats.delivered + stats.lost
    return 0.0 if attempts == 0 else stats.lost / attempts


def avg_throughput(stats, duration: float) -> float:
    """Delivered bytes per second."""
    if not duration > 0:
        raise ZeroDuration("throughput needs a positive duration")
    return stats.bytes_delivered / duration


def overhead(stats) -> int:
    return stats.overhead_bytes


def system_failure_probability(
    n_vehicles: int, t_max: int, d_f: float, k_min_failures: int = 0
) -> float:
    """Probability of at least ``k_min_failures`` failures in ``n_vehicles * t_max`` trials.

    Each trial fails independently with probability ``1 - d_f``.  With
    ``k_min_failures=0`` the sum covers the whole binomial support and the
    result is 1.  Large ``n`` is summed in log space over whichever tail is
    shorter.
    """
    if not (isinstance(n_vehicles, (int, np.integer)) and isinstance(t_max, (int, np.integer))):
        raise InvalidProbability("n_vehicles and t_max must be integers")
    n = int(n_vehicles) * int(t_max)
    if n < 0 or n_vehicles < 0:
        raise InvalidProbability("n_vehicles * t_max must be >= 0")
    if not (0.0 <= d_f <= 1.0):
        raise InvalidProbability(f"d_f must lie in [0, 1], got {d_f}")
    k = int(k_min_failures)
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    q = 1.0 - d_f
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    if n <= _DIRECT_SUM_MAX_N:
        return min(1.0, sum(math.comb(n, i) * q**i * d_f ** (n - i) for i in range(k, n + 1)))

    def log_pmf(i: np.ndarray) -> np.ndarray:
        return (
            gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
            + i * math.log(q) + (n - i) * math.log1p(-q)
        )

    if k > n * q:
        upper = float(np.exp(logsumexp(log_pmf(np.arange(k, n + 1, dtype=float)))))
        return min(1.0, upper)
    lower = float(np.exp(logsumexp(log_pmf(np.arange(0, k, dtype=float)))))
    return max(0.0, 1.0 - lower)


@dataclass(frozen=True)
class RunMetrics:
    tpr: float
    fpr: float
    plr: float
    avg_throughput: float  # bytes/s
    overhead_bytes: int
    mean_processing_time: float  # microseconds
    n_vehicles: int
    rogue_fraction: float
    seed: int
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    windows: int = 0

    def row(self) -> list[str]:
        return [_fmt(getattr(self, f)) for f in METRICS_FIELDS]

    def timing_row(self) -> list[str]:
        return [_fmt(self.n_vehicles), _fmt(self.rogue_fraction), _fmt(self.seed),
                _fmt(self.windows), _fmt(self.mean_processing_time)]

    def to_dict(self) -> dict:
        return asdict(self)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def aggregate(result) -> RunMetrics:
    """Collapse one :class:`~fround.netsim.RunResult` into a metrics record.

    Confusion counts cover the vehicles the guard judged at least once.
    """
    cfg = result.config
    counts = score(result.reports, result.rogues)
    times = [r.processing_time for r in result.reports]
    duration = cfg.duration
    return RunMetrics(
        tpr=tpr(counts),
        fpr=fpr(counts),
        plr=plr(result.stats),
        avg_throughput=avg_throughput(result.stats, duration) if duration > 0 else 0.0,
        overhead_bytes=overhead(result.stats),
        mean_processing_time=float(np.mean(times)) if times else 0.0,
        n_vehicles=result.n_vehicles,
        rogue_fraction=cfg.rogue_fraction,
        seed=cfg.seed,
        tp=counts.tp,
        fp=counts.fp,
        tn=counts.tn,
        fn=counts.fn,
        windows=len(result.reports),
    )


def metrics_csv(rows: Iterable[RunMetrics]) -> str:
    lines = [",".join(METRICS_FIELDS)]
    lines.extend(",".join(m.row()) for m in rows)
    return "\n".join(lines) + "\n"


def timing_csv(rows: Iterable[RunMetrics]) -> str:
    lines = [",".join(TIMING_FIELDS)]
    lines.extend(",".join(m.timing_row()) for m in rows)
    return "\n".join(lines) + "\n"


def metrics_json(rows: Sequence[RunMetrics]) -> str:
    return json.dumps([m.to_dict() for m in rows], indent=2) + "\n"
