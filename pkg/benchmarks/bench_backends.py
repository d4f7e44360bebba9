#!/usr/bin/env python3
"""
Quick benchmark of the numba stencil kernels against the pure-numpy fallback.

Times the raw chi^2 Lap_f operator application at a few grid sizes and then a
full trajectory solve, on both backends, and checks the results agree.
Run from the repo root after `pip install -e .`:

    python3 benchmarks/bench_backends.py

HEATBOUNDS_NO_NUMBA is ignored here on purpose: backends are requested
explicitly so both columns always run.
"""

import time

import numpy as np

from heatbounds import SystemSpec, build_cutoff, build_manifold, solve_trajectory
from heatbounds.backend import HAS_NUMBA
from heatbounds.stencils import apply_operator


def time_operator(man, reps, backend):
    rng = np.random.default_rng(42)
    p = man.pad(rng.standard_normal(man.shape))
    w00, w11, w0, w1 = (np.ones(man.shape) for _ in range(4))
    h0, h1 = man.h
    # warm up once so numba's compile time is not counted
    apply_operator(p, w00, w11, w0, w1, h0, h1, backend=backend)
    start = time.perf_counter()
    for _ in range(reps):
        out = apply_operator(p, w00, w11, w0, w1, h0, h1, backend=backend)
    return (time.perf_counter() - start) / reps, out


def time_solve(backend):
    man = build_manifold("torus-grid", 64, m=4.0)
    cut = build_cutoff(man, "whole")
    u0 = 1.0 + 0.5 * np.cos(man.X0)
    v0 = np.ones(man.shape)
    start = time.perf_counter()
    traj = solve_trajectory(man, cut, SystemSpec("linear"), u0, v0, 0.25,
                            snapshots=8, backend=backend)
    return time.perf_counter() - start, traj.u[-1]


def main():
    print(f"numba importable: {HAS_NUMBA}")
    print()

    print("=== chi^2 Lap_f stencil application ===")
    for n, reps in ((64, 400), (128, 200), (256, 50)):
        man = build_manifold("torus-grid", n, m=4.0)
        t_np, out_np = time_operator(man, reps, "numpy")
        line = f"{n:4d}^2  numpy {t_np * 1e3:8.3f} ms"
        if HAS_NUMBA:
            t_nb, out_nb = time_operator(man, reps, "numba")
            match = np.allclose(out_np, out_nb, atol=1e-13)
            line += f"   numba {t_nb * 1e3:8.3f} ms   speedup {t_np / t_nb:5.2f}x   match {match}"
        print(line)

    print()
    print("=== full trajectory solve (torus 64^2, rk4 to t=0.25) ===")
    t_np, u_np = time_solve("numpy")
    print(f"numpy  {t_np:7.3f} s")
    if HAS_NUMBA:
        # run twice: the first solve pays the JIT compile
        time_solve("numba")
        t_nb, u_nb = time_solve("numba")
        print(f"numba  {t_nb:7.3f} s   speedup {t_np / t_nb:.2f}x   "
              f"max diff {np.max(np.abs(u_np - u_nb)):.2e}")
    else:
        print("numba not installed - skipping the compiled column")


if __name__ == "__main__":
    main()
