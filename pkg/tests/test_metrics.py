import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binom

from fround.errors import InvalidProbability, ZeroDuration
from fround.metrics import (
    METRICS_FIELDS,
    aggregate,
    avg_throughput,
    fpr,
    metrics_csv,
    overhead,
    plr,
    system_failure_probability,
    tpr,
)
from fround.model import BeaconMessage, ConfusionCounts, Position, ScenarioConfig, VehicleState
from fround.netsim import ChannelStats, broadcast, run


def cc(tp=0, fp=0, tn=0, fn=0):
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def test_rates():
    assert tpr(cc(tp=8, fn=2)) == 0.8
    assert tpr(cc()) == 1.0
    assert fpr(cc(tn=95)) == 0.0
    assert fpr(cc(fp=5, tn=95)) == 0.05
    assert fpr(cc()) == 0.0


@given(st.integers(0, 1000), st.integers(0, 1000))
def test_tpr_plus_fnr_is_one(tp, fn):
    rate = tpr(cc(tp=tp, fn=fn))
    assert 0.0 <= rate <= 1.0
    if tp + fn:
        assert rate + fn / (tp + fn) == pytest.approx(1.0, abs=1e-15)


def test_plr():
    assert plr(ChannelStats(delivered=95, lost=5)) == 0.05
    assert plr(ChannelStats(delivered=95)) == 0.0
    assert plr(ChannelStats(lost=7)) == 1.0
    assert plr(ChannelStats()) == 0.0


def test_throughput():
    assert avg_throughput(ChannelStats(bytes_delivered=2560), 1.0) == 2560
    assert avg_throughput(ChannelStats(), 3.0) == 0
    with pytest.raises(ZeroDuration):
        avg_throughput(ChannelStats(), 0.0)


def test_throughput_two_vehicles_ten_seconds():
    result = run(ScenarioConfig(n_vehicles=2, duration=10.0, tx_range=5000.0))
    assert avg_throughput(result.stats, 10.0) == 2 * 10 * 10 * 256 / 10


def test_overhead_from_one_listed_broadcast():
    states = [VehicleState(i, Position(10.0 * i, 0), 50.0, 0) for i in range(11)]
    msg = BeaconMessage(0, 0, 50.0, Position(0, 0), 1.0, rogue_list=(3, 4, 9, 11), rlt_flag=1)
    stats = ChannelStats()
    broadcast(states[0], msg, states, 0.0, np.random.default_rng(0), stats=stats)
    assert overhead(stats) == 4 * 8 * 10
    assert overhead(ChannelStats()) == 0


def test_overhead_grows_with_listed_rogues():
    states = [VehicleState(i, Position(10.0 * i, 0), 50.0, 0) for i in range(11)]
    values = []
    for k in range(6):
        stats = ChannelStats()
        msg = BeaconMessage(0, 0, 50.0, Position(0, 0), 1.0, rogue_list=tuple(range(k)), rlt_flag=int(k > 0))
        broadcast(states[0], msg, states, 0.0, np.random.default_rng(0), stats=stats)
        values.append(overhead(stats))
    assert values == sorted(values) and values[0] == 0


def _exact_tail(n, d_f, k):
    q = 1 - Fraction(d_f)
    d = Fraction(d_f)

    def pmf(i):
        return math.comb(n, i) * q**i * d ** (n - i)

    if k <= n - k:
        return 1 - sum(pmf(i) for i in range(k))
    return sum(pmf(i) for i in range(k, n + 1))


def test_failure_probability_closed_forms():
    assert system_failure_probability(1, 1, 0.9, 1) == pytest.approx(0.1, abs=1e-15)
    assert system_failure_probability(2, 1, 0.9, 2) == pytest.approx(0.01, abs=1e-15)
    assert system_failure_probability(1, 2, 0.9, 2) == pytest.approx(0.01, abs=1e-15)
    assert system_failure_probability(10, 10, 0.3, 0) == 1.0
    assert system_failure_probability(5, 1, 0.5, 6) == 0.0


def test_failure_probability_rejects_bad_input():
    with pytest.raises(InvalidProbability):
        system_failure_probability(10, 1, 1.5, 1)
    with pytest.raises(InvalidProbability):
        system_failure_probability(-1, 1, 0.5, 1)


@pytest.mark.parametrize("n, d_f, k", [(5, 0.9, 1), (30, 0.6, 12), (64, 0.99, 3), (200, 0.95, 15), (5000, 0.999, 2)])
def test_failure_probability_against_exact_sum(n, d_f, k):
    exact = float(_exact_tail(n, d_f, k))
    assert system_failure_probability(n, 1, d_f, k) == pytest.approx(exact, rel=1e-9, abs=1e-300)


def test_failure_probability_against_scipy_binomial():
    rng = random.Random(5)
    for _ in range(200):
        n = rng.randint(1, 10**6 // 100) * rng.choice([1, 10, 100])
        d_f = rng.random()
        k = rng.randint(1, n)
        expected = binom.sf(k - 1, n, 1 - d_f)
        got = system_failure_probability(n, 1, d_f, k)
        assert got == pytest.approx(expected, rel=1e-6, abs=1e-12)


@given(st.integers(0, 10**4), st.floats(0, 1, allow_nan=False))
def test_failure_probability_full_sum_is_one(n, d_f):
    assert system_failure_probability(n, 1, d_f, 0) == 1.0


@given(st.integers(1, 3000), st.integers(1, 3000), st.floats(0, 1), st.floats(0, 1))
def test_failure_probability_monotone(n, k, a, b):
    k = min(k, n)
    lo, hi = sorted((a, b))
    assert system_failure_probability(n, 1, hi, k) <= system_failure_probability(n, 1, lo, k) + 1e-12
    assert system_failure_probability(n, 1, a, k) <= system_failure_probability(n, 1, a, k - 1) + 1e-12


def test_aggregate_empty_run():
    m = aggregate(run(ScenarioConfig(n_vehicles=5, duration=0.0)))
    assert m.windows == 0 and m.mean_processing_time == 0.0
    assert (m.tpr, m.fpr, m.plr) == (1.0, 0.0, 0.0)


def test_aggregate_single_window_matches_report():
    result = run(ScenarioConfig(n_vehicles=40, rogue_fraction=0.2, duration=1.0, tx_range=5000.0, seed=2))
    m = aggregate(result)
    assert m.windows == 1
    assert m.mean_processing_time == result.reports[0].processing_time
    assert m.tp == len(set(result.reports[0].rogue_ids) & result.rogues)


def test_metrics_csv_layout():
    rows = [aggregate(run(ScenarioConfig(n_vehicles=10, duration=1.0, seed=s))) for s in (1, 2)]
    lines = metrics_csv(rows).splitlines()
    assert lines[0] == ",".join(METRICS_FIELDS)
    assert len(lines) == 3
    assert [line.split(",")[2] for line in lines[1:]] == ["1", "2"]
    assert "processing" not in lines[0]
