"""Compare the compiled marching kernel against the pure-Python fallback.

Runs the same damped pulsating-flow problem through both backends at a few
mesh sizes and reports wall time per step and the speedup.  Best of three
repeats; the sampling stride is large so the numbers measure the kernels,
not the functional evaluation.

Usage: python3 benchmarks/bench_backends.py [--steps N]
"""

import argparse
import time

from pipeflex import (BeamParams, InitialCondition, SimulationConfig,
                      SineMode, SinusoidalOffset, Zero, simulate)
from pipeflex.backend import select_backend

PARAMS = BeamParams(m_p=0.5, m_f=0.25, EI=1.0, T=5.0, c=3.0, L=1.0)


def run_once(backend, n_elements, n_steps, dt=1e-4):
    cfg = SimulationConfig(params=PARAMS,
                           profile=SinusoidalOffset(2.0, 0.3, 0.5),
                           ic=InitialCondition(SineMode(1, 0.1), Zero()),
                           n_elements=n_elements, dt=dt, t_end=n_steps * dt,
                           output_stride=max(n_steps // 20, 1),
                           backend=backend)
    t0 = time.perf_counter()
    simulate(cfg)
    return time.perf_counter() - t0


def best_of(n, fn):
    return min(fn() for _ in range(n))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = []
    for name in ("compiled", "python"):
        try:
            select_backend(name)
        except Exception as exc:
            print("backend %s unavailable: %s" % (name, exc))
            continue
        backends.append(name)

    print("%8s %10s" % ("", "n_el"), end="")
    for name in backends:
        print(" %14s" % name, end="")
    print("  speedup" if len(backends) == 2 else "")

    for n_elements in (16, 32, 64, 128):
        # warm up assembly caches and JIT-independent paths
        for name in backends:
            run_once(name, n_elements, 200)
        times = [best_of(args.repeats,
                         lambda name=name: run_once(name, n_elements,
                                                    args.steps))
                 for name in backends]
        row = "%8s %10d" % ("", n_elements)
        for t in times:
            row += " %11.4f s" % t
        if len(times) == 2:
            row += " %8.2fx" % (times[1] / times[0])
        print(row)
    print("\n(%d steps per run, dt=1e-4, best of %d)"
          % (args.steps, args.repeats))


if __name__ == "__main__":
    main()
