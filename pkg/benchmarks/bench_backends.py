"""Time the numba kernels against their numpy fallbacks, and the three operator backends.

    python3 benchmarks/bench_backends.py [--repeat 5] [--json out.json]

Each row reports the best of ``--repeat`` runs after one warm-up call (which
also triggers JIT compilation).  Results of the two paths are checked for
agreement before timing.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from nonlocal_logistic import DiscreteOperator, Domain, KernelSpec, build_grid, cosine_resource, solve_fixed_point
from nonlocal_logistic import _kernels
from nonlocal_logistic._accel import NUMBA_AVAILABLE, set_numba_enabled


def best_time(fn, repeat: int) -> float:
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def compare(label: str, fn, repeat: int, rows: list) -> None:
    """Run ``fn`` with numba on and off; record both timings and their max difference."""
    out, times = {}, {}
    for flag in (True, False):
        if flag and not NUMBA_AVAILABLE:
            continue
        set_numba_enabled(flag)
        key = "numba" if flag else "numpy"
        out[key] = np.asarray(fn())
        times[key] = best_time(fn, repeat)
    set_numba_enabled(NUMBA_AVAILABLE)
    gap = float(np.max(np.abs(out["numba"] - out["numpy"]))) if len(out) == 2 else None
    speedup = times["numpy"] / times["numba"] if "numba" in times else None
    rows.append({"case": label, **times, "speedup": speedup, "max_abs_diff": gap})


def main(argv=None) -> list[dict]:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", help="write results here")
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    rows: list[dict] = []

    grid2 = build_grid(Domain.disk((0.0, 0.0), 1.0), 96)
    op2 = DiscreteOperator(grid2, KernelSpec.uniform(0.1, dim=2), backend="matfree")
    u2 = rng.random(grid2.n_cells)
    compare(f"direct conv 2D disk n={grid2.n_cells}", lambda: op2.convolve(u2), args.repeat, rows)

    b = rng.normal(size=200_000)
    q = rng.random(200_000)
    compare("stable root n=200000", lambda: _kernels.stable_root(b, q), args.repeat, rows)

    grid3 = build_grid(Domain.interval(0.0, 1.0), 512)
    op3 = DiscreteOperator(grid3, KernelSpec.uniform(0.1), backend="dense")
    m3 = cosine_resource(grid3)
    compare(
        "fixed point dense n=512 d=10",
        lambda: solve_fixed_point(op3, m3, 10.0, tol=1e-10).theta,
        max(1, args.repeat // 2),
        rows,
    )

    # backends at equal numba setting
    grid4 = build_grid(Domain.interval(0.0, 1.0), 2048)
    base = DiscreteOperator(grid4, KernelSpec.uniform(0.05), backend="dense")
    u4 = rng.random(grid4.n_cells)
    ref = base.apply(u4)
    for backend in ("dense", "matfree", "fft"):
        op4 = base.with_backend(backend)
        t = best_time(lambda: op4.apply(u4), args.repeat)
        gap = float(np.max(np.abs(op4.apply(u4) - ref)))
        rows.append({"case": f"apply n=2048 backend={backend}", "seconds": t, "max_abs_diff": gap})

    width = max(len(r["case"]) for r in rows)
    for r in rows:
        if "numba" in r or "numpy" in r:
            nb = f"{r['numba'] * 1e3:9.3f} ms" if "numba" in r else "      n/a   "
            sp = f"{r['speedup']:7.1f}x" if r["speedup"] else "     n/a"
            print(f"{r['case']:<{width}}  numba {nb}  numpy {r['numpy'] * 1e3:9.3f} ms  {sp}  diff {r['max_abs_diff']}")
        else:
            print(f"{r['case']:<{width}}  {r['seconds'] * 1e3:9.3f} ms  diff {r['max_abs_diff']:.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return rows


if __name__ == "__main__":
    main()
