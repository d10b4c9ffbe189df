"""Compare the compiled kernels against the numpy fallback.

Times single row-range kernels and a full blocked MPK on 2D Poisson matrices
for every importable backend, checks that both backends agree bit for bit,
and prints a table (or CSV with ``--csv``).

    python3 benchmarks/bench_kernels.py --grid 256 --repeat 5
"""
import argparse
import statistics
import time

import numpy as np

from powerblock import kernels
from powerblock.levels import prepare_blocking
from powerblock.sparse import gen_poisson, split_ldu


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def blocked_mpk(mod, A, plan, x, p_m):
    """Blocked MPK driven directly through one backend's spmv kernel."""
    from powerblock.mpk import execute

    Y = np.zeros((p_m + 1, A.n_rows))
    Y[0] = x

    def cell(rs, re, p, j, ws):
        mod.spmv(A.row_ptr, A.col, A.val, Y[p - 1], Y[p], rs, re)

    execute(plan, cell, p_m=p_m, threads=1)
    return Y


def cases(A, plan, p_m):
    s = split_ldu(A)
    n = A.n_rows
    x = np.random.default_rng(0).uniform(-1, 1, n)
    dinv = 1.0 / s.d
    out = np.empty(n)
    lo, up = s.l, s.u
    return {
        "spmv": lambda m: m.spmv(A.row_ptr, A.col, A.val, x, out, 0, n) or out.copy(),
        "spmv_split": lambda m: m.spmv_split(lo.row_ptr, lo.col, lo.val, s.d, up.row_ptr, up.col,
                                             up.val, x, out, 0, n) or out.copy(),
        "jacobi_sweep": lambda m: m.jacobi_sweep(lo.row_ptr, lo.col, lo.val, up.row_ptr, up.col, up.val,
                                                 dinv, x, x, out, 0, n) or out.copy(),
        f"mpk p={p_m}": lambda m: blocked_mpk(m, A, plan, x, p_m),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, nargs="+", default=[128, 512])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--power", type=int, default=4)
    ap.add_argument("--cache-mb", type=float, default=2.0)
    ap.add_argument("--csv", action="store_true")
    args = ap.parse_args(argv)

    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled backend not importable; timing the fallback only")
    rows = []
    for side in args.grid:
        A0 = gen_poisson((side, side))
        B = prepare_blocking(A0, args.cache_mb * 1e6, args.power)
        for name, fn in cases(B.A_perm, B.plan, args.power).items():
            results = {b: fn(m) for b, m in backends.items()}
            same = all(np.array_equal(r, results["python"]) for r in results.values())
            times = {b: best_of(lambda m=m: fn(m), args.repeat)[0] for b, m in backends.items()}
            speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
            rows.append((side * side, name, times["python"], times.get("cython", float("nan")),
                         speedup, same))

    header = ("rows", "kernel", "python_s", "cython_s", "speedup", "bitwise_equal")
    if args.csv:
        print(",".join(header))
        for r in rows:
            print(",".join(str(v) for v in r))
        return
    print(f"{'rows':>8} {'kernel':<14} {'python_s':>10} {'cython_s':>10} {'speedup':>8}  bitwise")
    for n, name, tp, tc, sp, same in rows:
        print(f"{n:>8} {name:<14} {tp:>10.5f} {tc:>10.5f} {sp:>8.1f}  {same}")


if __name__ == "__main__":
    main()
