"""Timing comparison of the compiled and pure-numpy simulation kernels.

Runs the open-loop excitation kernel and the closed-loop commit kernel on
a scalar plant and on a 4-state plant, and prints steps/second for each
backend plus the speedup. Usage: python benchmarks/bench_kernels.py [T]
"""

import sys
import time

import numpy as np

from ofu_lqg import CostParams, LqgSystem
from ofu_lqg.riccati import synthesize
from ofu_lqg.system import is_controllable, is_observable, spectral_radius
from ofu_lqg._kernels import _pure

try:
    from ofu_lqg._kernels import _core
except ImportError:
    _core = None


def scalar_plant():
    return LqgSystem(A=[[0.5]], B=[[1.0]], C=[[1.0]], sigma_w=1.0, sigma_z=1.0)


def four_state_plant():
    rng = np.random.default_rng(12)
    while True:
        A = rng.standard_normal((4, 4))
        A *= 0.85 / spectral_radius(A)
        B = rng.standard_normal((4, 2))
        C = rng.standard_normal((2, 4))
        if is_controllable(A, B) and is_observable(A, C):
            return LqgSystem(A=A, B=B, C=C, sigma_w=1.0, sigma_z=1.0)


def time_call(fn, *args, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_open_loop(module, sys_, T, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((T, sys_.p))
    w = sys_.sigma_w * rng.standard_normal((T, sys_.n))
    z = sys_.sigma_z * rng.standard_normal((T, sys_.m))
    return time_call(module.open_loop_rollout, sys_.A, sys_.B, sys_.C, u, w, z)


def bench_closed_loop(module, sys_, T, seed=0):
    cost = CostParams(Q=np.eye(sys_.m), R=np.eye(sys_.p))
    synth = synthesize(sys_, cost)
    rng = np.random.default_rng(seed)
    w = sys_.sigma_w * rng.standard_normal((T, sys_.n))
    z = sys_.sigma_z * rng.standard_normal((T, sys_.m))
    corr = np.eye(sys_.n) - synth.L @ sys_.C
    return time_call(
        module.closed_loop_rollout,
        sys_.A, sys_.B, sys_.C, sys_.A, sys_.B, corr, synth.L, synth.K,
        cost.Q, cost.R, np.zeros(sys_.n), np.zeros(sys_.n), w, z, 1e12, False,
    )


def main():
    T = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    cases = [
        ("open loop,   n=1", bench_open_loop, scalar_plant()),
        ("closed loop, n=1", bench_closed_loop, scalar_plant()),
        ("open loop,   n=4", bench_open_loop, four_state_plant()),
        ("closed loop, n=4", bench_closed_loop, four_state_plant()),
    ]
    print(f"T = {T} steps per kernel call, best of 3")
    header = f"{'kernel':<18} {'python steps/s':>15} {'cython steps/s':>15} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, bench, plant in cases:
        t_pure = bench(_pure, plant, T)
        if _core is not None:
            t_core = bench(_core, plant, T)
            print(
                f"{name:<18} {T / t_pure:>15.3e} {T / t_core:>15.3e} "
                f"{t_pure / t_core:>7.1f}x"
            )
        else:
            print(f"{name:<18} {T / t_pure:>15.3e} {'not built':>15} {'-':>8}")


if __name__ == "__main__":
    main()
