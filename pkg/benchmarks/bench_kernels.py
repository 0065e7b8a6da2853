"""Compiled vs numpy leapfrog kernel on one linear and one nonlinear run.

    python3 benchmarks/bench_kernels.py [--dr 0.0125] [--T 60] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from blowup_lab import kernels, profiles
from blowup_lab.wave_sim import CauchyProblem, Grid, evolve


def timed(problem, grid, T, advance, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = evolve(problem, grid, T, advance=advance)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--dr", type=float, default=0.0125)
    ap.add_argument("--T", type=float, default=60.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    compiled = kernels.compiled_advance()
    if compiled is None:
        print("compiled kernel not built; only the numpy backend is available")
        return 1
    grid = Grid(dr=args.dr)
    cases = {
        "linear free": CauchyProblem(profiles.free(3), 2.0, 1.0, nonlinear=False),
        "nonlinear scattering p=2": CauchyProblem(profiles.scattering(2.0, 2.0), 2.0, 6.0),
        "nonlinear free p=2.5": CauchyProblem(profiles.free(3), 2.5, 6.0),
    }
    print(f"{'case':28s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s}  agree")
    for name, prob in cases.items():
        t_py, out_py = timed(prob, grid, args.T, kernels.advance_py, args.repeat)
        t_c, out_c = timed(prob, grid, args.T, compiled, args.repeat)
        same = type(out_py) is type(out_c) and (
            getattr(out_py, "time", None) == getattr(out_c, "time", None))
        print(f"{name:28s} {t_py:10.3f} {t_c:11.3f} {t_py / t_c:8.1f}  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
