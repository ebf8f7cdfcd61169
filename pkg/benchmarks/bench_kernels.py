"""Timing for the Monte Carlo path kernel behind the covariance cross-check.

Runs terminal_state_covariance on the closed-loop matrices of the shipped
random fixture, after one warmup call so JIT compilation is paid before the
clock starts. When the compiled path is active the script reruns itself
with NESTH2_PURE_NUMPY=1 in a subprocess and prints the speedup; pass
--single to time the current mode only.

Usage: python3 benchmarks/bench_kernels.py [--paths N] [--steps N]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from nesth2 import _kernels
from nesth2.fixtures import make_random_fixture
from nesth2.statespace import lft_lower
from nesth2.synthesis import optimal_controller


def closed_loop_matrices():
    plant = make_random_fixture()
    synth = optimal_controller(plant)
    cl = lft_lower(plant.generalized(), synth.controller,
                   nz=plant.nz, nw=plant.nw)
    return cl.A, cl.B


def timed_run(A, B, n_paths, n_steps, repeats=3):
    _kernels.terminal_state_covariance(A, B, 1e-3, 64, 256, seed=1)
    best = np.inf
    cov = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        cov = _kernels.terminal_state_covariance(A, B, 1e-3, n_steps,
                                                 n_paths, seed=7)
        best = min(best, time.perf_counter() - t0)
    return best, cov


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=4000)
    parser.add_argument("--steps", type=int, default=5000)
    parser.add_argument("--single", action="store_true",
                        help="time the current mode only, print one line")
    args = parser.parse_args()

    A, B = closed_loop_matrices()
    elapsed, cov = timed_run(A, B, args.paths, args.steps)
    rate = args.paths * args.steps / elapsed

    if args.single:
        print("elapsed %.6f" % elapsed)
        return

    mode = "numba" if _kernels.USE_NUMBA else "pure numpy"
    print("path kernel benchmark (%d paths x %d steps, %d states, "
          "%d cores)" % (args.paths, args.steps, A.shape[0],
                         os.cpu_count() or 1))
    print("  mode %-10s  best of 3: %8.3f s   %10.3e path-steps/s"
          % (mode, elapsed, rate))
    print("  covariance trace %.6f (determinism anchor)" % np.trace(cov))

    if _kernels.USE_NUMBA:
        env = dict(os.environ, NESTH2_PURE_NUMPY="1")
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--single",
             "--paths", str(args.paths), "--steps", str(args.steps)],
            env=env, capture_output=True, text=True, check=True)
        other = float(out.stdout.split()[-1])
        print("  mode %-10s  best of 3: %8.3f s   %10.3e path-steps/s"
              % ("pure numpy", other, args.paths * args.steps / other))
        print("  speedup %.1fx" % (other / elapsed))
    else:
        print("  (NESTH2_PURE_NUMPY=1 set; rerun without it for the "
              "compiled comparison)")


if __name__ == "__main__":
    main()
