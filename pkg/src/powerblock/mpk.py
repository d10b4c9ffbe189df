"""Wavefront execution of row-range kernels and the matrix power kernel.

A kernel callback has the signature ``kernel(row_s, row_e, p, j, workspace)``
and must write only rows ``[row_s, row_e)`` of the storage for power ``p``,
sub-power ``j``.  It may read data of earlier stages at rows in neighbouring
level groups.

The executor walks *stages* ``(p, j)`` in order (powers 1..p_m, each split
into its sub-powers) and schedules ``(group, stage)`` cells on anti-diagonals:
cell ``(g, e)`` runs on diagonal ``g + e`` and, within a diagonal, stages run
in ascending order.  When cell ``(g, e)`` starts, cells ``(g-1, e-1)``,
``(g, e-1)`` and ``(g+1, e-1)`` are complete, which is all the level
adjacency property requires.  With one sub-power per power this is the
plain ``(group, power)`` wavefront.
"""
from __future__ import annotations

import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .levels import ExecutionPlan, LevelStructure, group_levels
from .sparse import CsrMatrix, spmv_range

_POOLS: dict[int, ThreadPoolExecutor] = {}


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("MPK_NUM_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def _pool(threads: int) -> ThreadPoolExecutor:
    pool = _POOLS.get(threads)
    if pool is None:
        pool = _POOLS[threads] = ThreadPoolExecutor(max_workers=threads, thread_name_prefix="mpk")
    return pool


def static_chunks(rs: int, re: int, threads: int) -> list[tuple[int, int]]:
    """Even static partition of [rs, re) into at most ``threads`` pieces."""
    n = re - rs
    k = max(1, min(threads, n))
    bounds = rs + (np.arange(k + 1) * n) // k
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(k)]


def _run_cell(kernel, workspace, rs, re, p, j, threads):
    if threads == 1 or re - rs < 2 * threads:
        kernel(rs, re, p, j, workspace)
        return
    futures = [_pool(threads).submit(kernel, a, b, p, j, workspace)
               for a, b in static_chunks(rs, re, threads)]
    for f in futures:  # barrier
        f.result()


def stage_list(p_m: int, sub_powers: int | Sequence[int] = 1) -> list[tuple[int, int]]:
    if isinstance(sub_powers, (int, np.integer)):
        sub_powers = [int(sub_powers)] * p_m
    if len(sub_powers) != p_m or min(sub_powers, default=1) < 1:
        raise ValueError("need one sub-power count >= 1 per power")
    return [(p, j) for p in range(1, p_m + 1) for j in range(sub_powers[p - 1])]


def wavefront(n_groups: int, n_stages: int) -> list[tuple[int, int]]:
    """Cell order ``(group, stage_index)`` of the diagonal schedule (0-based stages)."""
    cells = []
    for d in range(n_groups + n_stages - 1):
        for e in range(n_stages):
            g = d - e
            if 0 <= g < n_groups:
                cells.append((g, e))
    return cells


def schedule(n_groups: int, p_m: int) -> list[tuple[int, int]]:
    """``(group, power)`` cell order for one sub-power per power."""
    return [(g, e + 1) for g, e in wavefront(n_groups, p_m)]


def execute(plan: ExecutionPlan, kernel: Callable, workspace=None, p_m: int | None = None,
            sub_powers: int | Sequence[int] | None = None, threads: int | None = None,
            trace: list | None = None) -> None:
    """Run ``kernel`` over every (group, power, sub-power) cell in wavefront order.

    ``p_m`` and ``sub_powers`` default to the plan's values.  ``trace``, if
    given, receives ``(group, p, j)`` for every executed cell in order.
    """
    p_m = plan.p_m if p_m is None else p_m
    stages = stage_list(p_m, plan.sub_powers if sub_powers is None else sub_powers)
    threads = resolve_threads(threads)
    rp = plan.group_row_ptr
    for g, e in wavefront(plan.n_groups, len(stages)):
        p, j = stages[e]
        rs, re = int(rp[g]), int(rp[g + 1])
        if rs < re:
            _run_cell(kernel, workspace, rs, re, p, j, threads)
        if trace is not None:
            trace.append((g, p, j))


def sweep(n_rows: int, kernel: Callable, workspace=None, p_m: int = 1,
          sub_powers: int | Sequence[int] = 1, threads: int | None = None,
          trace: list | None = None) -> None:
    """Baseline order: every stage as one full-range sweep, stages back to back."""
    threads = resolve_threads(threads)
    for p, j in stage_list(p_m, sub_powers):
        _run_cell(kernel, workspace, 0, n_rows, p, j, threads)
        if trace is not None:
            trace.append((0, p, j))


def run(n_rows: int, kernel: Callable, workspace=None, p_m: int = 1,
        sub_powers: int | Sequence[int] = 1, plan: ExecutionPlan | None = None,
        threads: int | None = None) -> None:
    """Dispatch to :func:`execute` when a plan is given, else :func:`sweep`."""
    if plan is None:
        sweep(n_rows, kernel, workspace, p_m, sub_powers, threads)
    else:
        if plan.n_rows != n_rows:
            raise ValueError(f"plan covers {plan.n_rows} rows, operator has {n_rows}")
        execute(plan, kernel, workspace, p_m, sub_powers, threads)


def audit_dependencies(trace, n_groups: int) -> bool:
    """Check that each traced cell's three predecessor cells ran before it.

    ``trace`` holds ``(group, p, j)`` triples; the predecessor of a stage is
    the previous stage in (p, j) order.
    """
    stages = sorted({(p, j) for _, p, j in trace})
    index = {s: i for i, s in enumerate(stages)}
    done = set()
    for g, p, j in trace:
        e = index[(p, j)]
        if (g, e) in done:
            return False
        if e > 0:
            for h in (g - 1, g, g + 1):
                if 0 <= h < n_groups and (h, e - 1) not in done:
                    return False
        done.add((g, e))
    return len(done) == n_groups * len(stages)


class PlainOperator:
    """``out = A src`` as a single-stage chained operator."""

    n_sub = 1

    def __init__(self, A: CsrMatrix):
        self.A = A
        self.n_rows = A.n_rows

    def new_scratch(self, n: int) -> list:
        return []

    def stage(self, j, rs, re, src, dst, scratch):
        spmv_range(self.A, src, dst, rs, re)

    def apply(self, x, out=None):
        out = np.empty(self.n_rows) if out is None else out
        scratch = self.new_scratch(self.n_rows)
        for j in range(self.n_sub):
            self.stage(j, 0, self.n_rows, x, out, scratch)
        return out


def as_operator(A):
    return PlainOperator(A) if isinstance(A, CsrMatrix) else A


def _vector_block(x, p_m: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    Y = np.empty((p_m + 1, x.size))
    Y[0] = x
    return Y


def mpk(A: CsrMatrix, x, p_m: int, plan: ExecutionPlan | None, threads: int | None = None) -> np.ndarray:
    """Return the (p_m+1) x n block ``[x, A x, ..., A^p_m x]``.

    ``A`` and ``x`` must already be in level order when a plan is given.
    """
    Y = _vector_block(x, p_m)

    def kernel(rs, re, p, j, ws):
        spmv_range(A, ws[p - 1], ws[p], rs, re)

    run(A.n_rows, kernel, Y, p_m, 1, plan, threads)
    return Y


def baseline_mpk(A: CsrMatrix, x, p_m: int, threads: int | None = None) -> np.ndarray:
    """Back-to-back full SpMVs; the bitwise reference for :func:`mpk`."""
    return mpk(A, x, p_m, None, threads)


def normalize_shifts(shifts) -> tuple[np.ndarray, np.ndarray]:
    """Split shifts into per-position real part and b^2 pair-correction term.

    A complex shift ``a + b i`` must be followed immediately by its
    conjugate; the pair contributes ``b^2`` at the second position.
    """
    shifts = np.asarray(shifts, dtype=np.complex128)
    re_part = shifts.real.copy()
    pair = np.zeros(shifts.size)
    i = 0
    while i < shifts.size:
        if shifts[i].imag != 0.0:
            if i + 1 >= shifts.size:
                raise ValueError("complex shift pair straddles the end of the block")
            if shifts[i + 1] != np.conj(shifts[i]):
                raise ValueError("complex shifts must be stored as adjacent conjugate pairs")
            pair[i + 1] = shifts[i].imag ** 2
            i += 2
        else:
            i += 1
    return re_part, pair


def mpk_shifted(A, shifts, x, p_m: int, plan: ExecutionPlan | None,
                threads: int | None = None) -> np.ndarray:
    """Newton-basis block: ``y_p = (A_op - a_p I) y_{p-1} + b_p^2 y_{p-2}``.

    ``A`` is a :class:`CsrMatrix` or a chained operator (``A M^-1``) exposing
    ``n_sub``, ``new_scratch`` and ``stage``.  Conjugate pairs use the real
    two-step form.
    """
    op = as_operator(A)
    if len(shifts) != p_m:
        raise ValueError("need exactly p_m shifts")
    re_part, pair = normalize_shifts(shifts)
    Y = _vector_block(x, p_m)
    scratch = [op.new_scratch(op.n_rows) for _ in range(p_m)]
    last = op.n_sub - 1

    def kernel(rs, re, p, j, ws):
        op.stage(j, rs, re, ws[p - 1], ws[p], scratch[p - 1])
        if j == last:
            a, b2 = re_part[p - 1], pair[p - 1]
            if a != 0.0:
                ws[p, rs:re] -= a * ws[p - 1, rs:re]
            if b2 != 0.0:
                ws[p, rs:re] += b2 * ws[p - 2, rs:re]

    run(op.n_rows, kernel, Y, p_m, op.n_sub, plan, threads)
    return Y


def power_slices(p_m: int, p_opt: int) -> list[int]:
    """Split ``p_m`` powers into consecutive MPK calls of at most ``p_opt``."""
    if p_opt < 1:
        raise ValueError("p_opt must be >= 1")
    full, rem = divmod(p_m, p_opt)
    return [p_opt] * full + ([rem] if rem else [])


def measure_throughput(A: CsrMatrix, levels: LevelStructure, cache_bytes: float, p: int,
                       A_perm: CsrMatrix | None = None, repetitions: int = 3,
                       threads: int | None = None, blocked: bool = True) -> float:
    """GFLOP/s-equivalent (2 nnz p / time) of one MPK, median of ``repetitions`` runs."""
    from .sparse import permute

    A_perm = permute(A, levels.perm) if A_perm is None else A_perm
    plan = group_levels(levels, A, cache_bytes, p) if blocked else None
    x = np.random.default_rng(0).uniform(-1, 1, A.n_rows)
    mpk(A_perm, x, p, plan, threads)  # warm-up
    times = []
    for _ in range(max(3, repetitions)):
        t0 = time.perf_counter()
        mpk(A_perm, x, p, plan, threads)
        times.append(time.perf_counter() - t0)
    return 2.0 * A.nnz * p / statistics.median(times) / 1e9


def select_p(table: dict[int, float]) -> int:
    """Argmax throughput; ties go to the smaller power."""
    if not table:
        raise ValueError("empty tuning table")
    best = max(table.values())
    return min(p for p, t in table.items() if t == best)


def tune_p(A: CsrMatrix, levels: LevelStructure, cache_bytes: float, p_range,
           trial_fn: Callable[[int], float] | None = None, repetitions: int = 3,
           threads: int | None = None) -> int:
    """Pick the power with the highest blocked-MPK throughput.

    ``trial_fn(p)`` returns a throughput; by default the blocked MPK is
    timed on ``A`` (original numbering, permuted internally).
    """
    p_range = sorted(set(int(p) for p in p_range))
    if not p_range:
        raise ValueError("p_range must be non-empty")
    if trial_fn is None:
        from .sparse import permute

        A_perm = permute(A, levels.perm)

        def trial_fn(p):
            return measure_throughput(A, levels, cache_bytes, p, A_perm, repetitions, threads)

    return select_p({p: float(trial_fn(p)) for p in p_range})
