import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fround import _pykernels, kernels

ckernels = pytest.importorskip("fround._ckernels")

speeds_arrays = arrays(np.float64, st.integers(1, 200), elements=st.floats(-100, 200, allow_nan=False))


@settings(max_examples=300)
@given(speeds_arrays, st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([0.1, 1.0]))
def test_window_stats_bit_identical(speeds, k, floor):
    densities = speeds * 13.0 + 1.0
    a = ckernels.window_stats(speeds, densities, k, floor)
    b = _pykernels.window_stats(speeds, densities, k, floor)
    assert a[:3] == b[:3]
    assert np.array_equal(a[3], b[3])


@settings(max_examples=200)
@given(st.integers(2, 300), st.integers(0, 2**32 - 1), st.floats(0, 2000), st.floats(0, 0.9))
def test_deliver_row_identical(n, seed, tx_range, loss):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 4828, n)
    y = rng.choice([0.0, 3.7], n)
    u = rng.random(n)
    sender = int(rng.integers(n))
    ia, oa = ckernels.deliver_row(sender, x, y, tx_range, loss, u)
    ib, ob = _pykernels.deliver_row(sender, x, y, tx_range, loss, u)
    assert np.array_equal(ia, ib) and np.array_equal(oa, ob)
    assert sender not in ia.tolist()


def test_car_follow_identical():
    from fround.mobility import lane_leaders

    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 400))
        x = rng.uniform(0, 1000, n)
        lane = rng.integers(0, 2, n)
        leader, gap, order = lane_leaders(x, lane, 1000.0)
        base = rng.uniform(30, 65, n)
        a, b = base.copy(), base.copy()
        ckernels.car_follow(order, leader, gap, a, 10.0)
        _pykernels.car_follow(order, leader, gap, b, 10.0)
        assert np.array_equal(a, b)


def test_compiled_backend_selected_by_default():
    if os.environ.get("FROUND_PURE_PYTHON", "") not in ("", "0"):
        pytest.skip("pure-Python backend forced")
    assert kernels.BACKEND == "cython"


def _run_metrics(env_extra):
    code = (
        "from fround import run, aggregate, ScenarioConfig, BACKEND;"
        "from fround.metrics import metrics_csv;"
        "r = run(ScenarioConfig(n_vehicles=120, rogue_fraction=0.3, loss_prob=0.05, duration=2.0, seed=9));"
        "print(BACKEND); print(metrics_csv([aggregate(r)]), end='')"
    )
    env = dict(os.environ, **env_extra)
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
    return out.stdout.split("\n", 1)


def test_whole_run_identical_across_backends():
    backend_c, compiled = _run_metrics({"FROUND_PURE_PYTHON": "0"})
    backend_py, pure = _run_metrics({"FROUND_PURE_PYTHON": "1"})
    assert (backend_c, backend_py) == ("cython", "python")
    assert compiled == pure
