"""Time the compiled and numpy kernels side by side.

    python benchmarks/bench_kernels.py [--n-r 48] [--n-theta 128] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from simlab import kernels
from simlab.domain import PolarGrid, RadialDomain, StatePair
from simlab.model import CoefficientFn, SystemSpec
from simlab.solver import Stepper


def lv_spec(domain):
    c = CoefficientFn.const
    return SystemSpec("lotka_volterra", domain, dict(mu1=c(1), mu2=c(1), a1=c(1), a2=c(1),
                                                     b1=c(1), b2=c(1), alpha1=c(0.8), alpha2=c(0.8)))


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-r", type=int, default=48)
    ap.add_argument("--n-theta", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    kernels.set_num_threads(args.threads)

    mods = kernels.available_backends()
    nr, nt = args.n_r, args.n_theta
    rng = np.random.default_rng(0)
    lower = -rng.uniform(0.1, 0.4, nr)
    upper = -rng.uniform(0.1, 0.4, nr)
    diag = 1.0 - lower - upper
    rhs = rng.normal(size=(nr, nt))
    u = rng.normal(size=(nr, nt))
    g = np.ascontiguousarray(rng.uniform(size=(nr, nt // 2 + 1)))
    kmax = np.full(nr, nt // 2, dtype=np.int64)
    sd = rng.uniform(2, 3, 512)
    off2 = rng.uniform(0, 1, 511)
    shifts = np.linspace(0, 5, 64)
    grid = PolarGrid(RadialDomain(0.5, 1.0), nr, nt)
    spec = lv_spec(grid.domain)
    state = StatePair.from_arrays(grid, 1 + 0.1 * rng.normal(size=grid.shape), np.ones(grid.shape))

    print(f"grid {nr} x {nt}, threads {args.threads}, best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{name:>14}" for name in mods) + f"{'speedup':>10}")
    rows = {
        "tridiag_lines": lambda m: (lambda: kernels.tridiag_lines(lower, diag, upper, rhs,
                                                                  np.empty_like(rhs), m)),
        "circulant_rings": lambda m: (lambda: kernels.circulant_rings(u, g, kmax, np.empty_like(u), m)),
        "sturm_counts": lambda m: (lambda: kernels.sturm_counts(sd, off2, shifts, 1e-300, m)),
    }
    for label, make in rows.items():
        times = {name: best(make(m), args.repeat) for name, m in mods.items()}
        report(label, times)

    # a full IMEX step routes through whichever module is the active backend
    saved = kernels.backend
    times = {}
    try:
        for name, m in mods.items():
            kernels.backend = m
            stepper = Stepper(spec, grid)
            v1, v2 = state.u1.values, state.u2.values
            times[name] = best(lambda: stepper.advance(v1, v2, 0.0, 2e-3), args.repeat)
    finally:
        kernels.backend = saved
    report("full step", times)


def report(label, times):
    cells = "".join(f"{t * 1e3:>12.3f}ms" for t in times.values())
    speed = times["python"] / times["cython"] if "cython" in times else float("nan")
    print(f"{label:<16}{cells}{speed:>9.1f}x")


if __name__ == "__main__":
    main()
