"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--sizes 500 1000 2000 4000] [--repeat 7]

Each figure is the best of ``--repeat`` runs.  A whole-simulation comparison
runs both backends in fresh interpreters, since the backend is picked at
import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fround import _pykernels
from fround.mobility import lane_leaders

try:
    from fround import _ckernels
except ImportError:
    sys.exit("compiled extension not built; reinstall without FROUND_NO_EXTENSIONS")


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'N':>6}{'cython us':>12}{'python us':>12}{'speedup':>9}")
    for n in sizes:
        speeds = rng.normal(60.0, 2.0, n)
        dens = np.full(n, 1000.0)
        x = rng.uniform(0, 4828.032, n)
        y = rng.choice([1.85, 5.55], n)
        u = rng.random(n)
        lane = rng.integers(0, 2, n)
        leader, gap, order = lane_leaders(x, lane, 4828.032)
        base = rng.uniform(30, 65, n)

        cases = {
            "window_stats": lambda m: m.window_stats(speeds, dens, 1.0, 0.1),
            "deliver_row": lambda m: m.deliver_row(0, x, y, 500.0, 0.05, u),
            "car_follow": lambda m: m.car_follow(order, leader, gap, base.copy(), 10.0),
        }
        for name, call in cases.items():
            number = max(1, 20000 // n)
            c = best(lambda: call(_ckernels), repeat, number) * 1e6
            p = best(lambda: call(_pykernels), repeat, number) * 1e6
            print(f"{name:<14}{n:>6}{c:>12.1f}{p:>12.1f}{p / c:>8.1f}x")


RUN_SNIPPET = """
import time
from fround import run, ScenarioConfig, BACKEND
cfg = ScenarioConfig(n_vehicles={n}, rogue_fraction=0.2, duration=2.0, seed=1)
run(cfg.with_(duration=0.1))
t = time.perf_counter(); run(cfg); print(BACKEND, time.perf_counter() - t)
"""


def bench_run(n):
    for flag in ("0", "1"):
        env = dict(os.environ, FROUND_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", RUN_SNIPPET.format(n=n)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"run N={n} backend={out[0]:<7} {float(out[1]):.2f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000, 4000])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--run-size", type=int, default=500)
    args = ap.parse_args()
    bench_kernels(args.sizes, args.repeat)
    bench_run(args.run_size)


if __name__ == "__main__":
    main()
