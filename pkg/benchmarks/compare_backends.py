#!/usr/bin/env python3
"""Time the compiled kernel against the pure-Python fallback.

Both kernels promise bit-identical output for a given seed, so this script
double-checks that promise on every workload it times.  Run from the repo
root after an editable install:

    python3 benchmarks/compare_backends.py
"""

import math
import time

import numpy as np

from mutclock.backend import _pykernel
from mutclock.backend import get_backend

WORKLOADS = [
    ("k=1 sparse (d=1, N=1e3)", dict(d=1, L=1e3, alpha=1.0, mu=(1e-3,), k=1,
                                     t_max=math.inf, cap=10**7), 40),
    ("two-stage separated (d=1, N=1e4)", dict(d=1, L=1e4, alpha=1.0, mu=(1e-2, 1e-6), k=2,
                                              t_max=math.inf, cap=10**7), 3),
    ("two-stage balanced (d=2, N=1e4)", dict(d=2, L=1e2, alpha=1.0, mu=(1e-3, 1e-3), k=2,
                                             t_max=math.inf, cap=10**7), 10),
    ("three-stage (d=1, N=1e4)", dict(d=1, L=1e4, alpha=1.0, mu=(1e-3,) * 3, k=3,
                                      t_max=math.inf, cap=10**7), 3),
]


def run(kernel, spec, reps, use_grid=False, grid_hint=0.0):
    outs = []
    t0 = time.perf_counter()
    for i in range(reps):
        outs.append(kernel.simulate_core(
            spec["d"], spec["L"], spec["alpha"], spec["mu"], spec["k"],
            1000 + i, spec["t_max"], spec["cap"],
            use_grid=use_grid, grid_hint=grid_hint,
        ))
    return time.perf_counter() - t0, outs


def same(a, b):
    sig_equal = a[1] == b[1] or (math.isnan(a[1]) and math.isnan(b[1]))
    return a[0] == b[0] and sig_equal and a[2] == b[2] and a[6] == b[6]


def main():
    compiled = get_backend()
    if compiled.NAME != "compiled":
        print("compiled kernel not available; nothing to compare")
        return
    print(f"{'workload':<38} {'python':>10} {'compiled':>10} {'speedup':>8}  identical")
    for name, spec, reps in WORKLOADS:
        t_py, out_py = run(_pykernel, spec, reps)
        t_c, out_c = run(compiled, spec, reps)
        ok = all(same(a, b) for a, b in zip(out_py, out_c))
        ncand = sum(o[2] for o in out_c)
        print(f"{name:<38} {t_py:>9.3f}s {t_c:>9.3f}s {t_py / t_c:>7.1f}x  {ok}"
              f"   ({ncand} candidates)")
        if not ok:
            raise SystemExit("backends disagree -- bit-identity contract broken")

    # the grid index only pays off with many small live regions: slow growth,
    # frequent second-stage candidates that each reject against the whole set
    spec = dict(d=1, L=1e4, alpha=1e-6, mu=(1.0, 0.02), k=2, t_max=math.inf, cap=10**7)
    t_scan, out_scan = run(compiled, spec, 3)
    t_grid, out_grid = run(compiled, spec, 3, use_grid=True, grid_hint=12.0)
    ok = all(same(a, b) for a, b in zip(out_scan, out_grid))
    print(f"{'grid index (many live events)':<38} {t_scan:>9.3f}s {t_grid:>9.3f}s "
          f"{t_scan / t_grid:>7.1f}x  {ok}   (scan vs grid, compiled)")
    if not ok:
        raise SystemExit("grid index changed results -- contract broken")


if __name__ == "__main__":
    main()
