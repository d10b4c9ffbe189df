"""Command-line harness: ``solver mpk-bench|solve|levels|tune``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from .krylov import SolverBreakdown, SolverConfig, SolverDivergence, solve
from .levels import DEFAULT_CACHE_MB, build_levels, group_levels, level_summary
from .mpk import baseline_mpk, mpk, resolve_threads, select_p
from .precon import make_preconditioner
from .sparse import CsrMatrix, MatrixFormatError, ZeroDiagonalError, parse_matrix_spec, permute

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

MPK_BENCH_COLUMNS = ("p", "baseline_gflops", "race_gflops", "verified")
STUDY_COLUMNS = ("k", "iters", "eff_spmvs", "solve_s", "total_s")


class UsageError(Exception):
    pass


def matrix_hash(A: CsrMatrix) -> str:
    h = hashlib.sha256()
    h.update(np.array([A.n_rows, A.n_cols], dtype=np.int64).tobytes())
    for arr in (A.row_ptr, A.col, A.val):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def matrix_stats(A: CsrMatrix) -> dict:
    return {"n_rows": A.n_rows, "nnz": A.nnz, "nnzr": A.nnzr}


def load_config(text: str | None) -> dict:
    if not text:
        return {}
    path = Path(text)
    try:
        raw = path.read_text() if path.exists() else text
        cfg = json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _cache_bytes(args, cfg) -> float:
    if args.cache_mb is not None:
        mb = args.cache_mb
    else:
        mb = cfg.get("mpk", {}).get("cache_mb", DEFAULT_CACHE_MB)
    if not mb > 0:
        raise UsageError("cache size must be positive")
    return float(mb) * 1e6


def _p_range(cfg) -> list[int]:
    pr = cfg.get("mpk", {}).get("p_range", list(range(1, 9)))
    if isinstance(pr, int):
        pr = [pr]
    pr = sorted({int(p) for p in pr})
    if not pr or pr[0] < 1 or pr[-1] > 16:
        raise UsageError("p_range must be a non-empty subset of [1, 16]")
    return pr


def _repetitions(cfg) -> int:
    reps = int(cfg.get("mpk", {}).get("repetitions", 3))
    if reps < 1:
        raise UsageError("repetitions must be >= 1")
    return reps


def _median_time(fn, reps: int) -> float:
    fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


# ---------------------------------------------------------------- commands


def cmd_mpk_bench(A: CsrMatrix, cfg: dict, cache_bytes: float, threads: int | None) -> dict:
    """Baseline vs cache-blocked MPK throughput for every ``p`` in ``p_range``."""
    reps = _repetitions(cfg)
    t0 = time.perf_counter()
    levels = build_levels(A)
    A_perm = permute(A, levels.perm)
    prep = time.perf_counter() - t0
    x = np.random.default_rng(0).uniform(-1.0, 1.0, A.n_rows)
    rows = []
    for p in _p_range(cfg):
        plan = group_levels(levels, A, cache_bytes, p)
        ref = baseline_mpk(A_perm, x, p, threads)
        verified = bool(np.array_equal(ref, mpk(A_perm, x, p, plan, threads)))
        flops = 2.0 * A.nnz * p / 1e9
        tb = _median_time(lambda: baseline_mpk(A_perm, x, p, threads), reps)
        tr = _median_time(lambda: mpk(A_perm, x, p, plan, threads), reps)
        rows.append({"p": p, "baseline_gflops": flops / tb, "race_gflops": flops / tr,
                     "verified": verified, "n_groups": plan.n_groups})
    return {
        "command": "mpk-bench",
        "matrix": matrix_stats(A),
        "levels": level_summary(levels),
        "cache_bytes": cache_bytes,
        "threads": resolve_threads(threads),
        "preprocessing_s": prep,
        "p_sweep": rows,
        "verified": all(r["verified"] for r in rows),
    }


def _study_key(precon: dict | None):
    if not precon:
        return None
    for key in ("sweeps", "degree"):
        if isinstance(precon.get(key), list):
            return key
    return None


def _plan_power(cfg: SolverConfig, precon: dict | None) -> int:
    if cfg.p_opt:
        return int(cfg.p_opt)
    if cfg.kind == "sstep_gmres":
        return cfg.s
    precon = precon or {}
    if precon.get("type") == "jacobi":
        return max(1, int(precon.get("sweeps", 1)))
    if precon.get("type") == "poly":
        return min(8, int(precon.get("degree", 10)))
    return 4


def _rhs(cfg: dict, n: int) -> np.ndarray:
    kind = cfg.get("rhs", "ones")
    if kind == "ones":
        return np.ones(n)
    if kind == "random":
        return np.random.default_rng(int(cfg.get("seed", 0))).uniform(-1.0, 1.0, n)
    raise UsageError(f"unknown rhs {kind!r}")


def _tuned_p(cfg: dict, A: CsrMatrix) -> int | None:
    path = cfg.get("mpk", {}).get("tune_file")
    if not path:
        return None
    try:
        rec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read tune file: {exc}") from exc
    return int(rec["p_opt"]) if rec.get("matrix_hash") == matrix_hash(A) else None


def _solve_pair(A: CsrMatrix, cfg_raw: dict, precon_spec: dict | None, cache_bytes: float,
                threads: int | None) -> dict:
    """Run one solver configuration with baseline and blocked kernels."""
    cfg_raw = dict(cfg_raw)
    cfg_raw["precon"] = precon_spec
    cfg = SolverConfig.from_dict(cfg_raw)
    cfg.cache_bytes = cache_bytes
    cfg.p_opt = cfg.p_opt or _tuned_p(cfg_raw, A)

    t0 = time.perf_counter()
    levels = build_levels(A)
    A_perm = permute(A, levels.perm)
    plan = group_levels(levels, A, cache_bytes, _plan_power(cfg, precon_spec))
    plan.p_opt = cfg.p_opt
    b = _rhs(cfg_raw, A.n_rows)[levels.inv_perm]
    prep_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    base_pre = make_preconditioner(A_perm, precon_spec, None, threads, seed_vector=b)
    setup_s = time.perf_counter() - t0
    blocked_pre = base_pre.with_plan(plan)

    runs = {}
    for name, pre, use_plan in (("baseline", base_pre, False), ("blocked", blocked_pre, True)):
        run_cfg = SolverConfig(**{**cfg.__dict__, "mpk_enabled": use_plan})
        t0 = time.perf_counter()
        rep = solve(A_perm, b, run_cfg, pre, plan if use_plan else None)
        rep.x = rep.x[levels.perm]
        solve_s = time.perf_counter() - t0
        rep.timings["misc"] += prep_s + setup_s
        runs[name] = (rep, solve_s)

    base, blocked = runs["baseline"][0], runs["blocked"][0]
    identical = bool(np.array_equal(base.x, blocked.x)) and base.residual_history == blocked.residual_history
    return {
        "baseline": {**base.to_dict(), "solve_s": runs["baseline"][1]},
        "blocked": {**blocked.to_dict(), "solve_s": runs["blocked"][1]},
        "speedup": runs["baseline"][1] / runs["blocked"][1] if runs["blocked"][1] > 0 else float("nan"),
        "verified": identical,
        "converged": base.converged and blocked.converged,
        "preprocessing_s": prep_s,
        "setup_s": setup_s,
        "n_groups": plan.n_groups,
        "iterations": blocked.iterations,
        "effective_spmv_count": blocked.effective_spmv_count,
    }


def cmd_solve(A: CsrMatrix, cfg: dict, cache_bytes: float, threads: int | None) -> dict:
    """Solve with baseline and blocked kernels; a list-valued ``sweeps``/``degree`` runs a study."""
    precon = cfg.get("precon")
    key = _study_key(precon)
    report = {"command": "solve", "matrix": matrix_stats(A), "config": cfg}
    if key is None:
        report.update(_solve_pair(A, cfg, precon, cache_bytes, threads))
        return report
    rows, runs = [], []
    for k in precon[key]:
        res = _solve_pair(A, cfg, {**precon, key: int(k)}, cache_bytes, threads)
        runs.append(res)
        solve_s = res["blocked"]["solve_s"]
        rows.append({"k": int(k), "iters": res["iterations"], "eff_spmvs": res["effective_spmv_count"],
                     "solve_s": solve_s, "total_s": solve_s + res["preprocessing_s"] + res["setup_s"]})
    report.update({
        "study_parameter": key,
        "study": rows,
        "verified": all(r["verified"] for r in runs),
        "converged": all(r["converged"] for r in runs),
    })
    return report


def cmd_levels(A: CsrMatrix, cfg: dict, cache_bytes: float) -> dict:
    levels = build_levels(A)
    p_m = int(cfg.get("mpk", {}).get("p_m", 4))
    plan = group_levels(levels, A, cache_bytes, p_m)
    out = {"command": "levels", "matrix": matrix_stats(A), **level_summary(levels, plan)}
    out["level_sizes_list"] = levels.level_sizes().tolist()
    return out


def cmd_tune(A: CsrMatrix, cfg: dict, cache_bytes: float, threads: int | None,
             trial_fn=None) -> dict:
    """Time the blocked MPK for every ``p`` and record the argmax."""
    reps = _repetitions(cfg)
    levels = build_levels(A)
    A_perm = permute(A, levels.perm)
    x = np.random.default_rng(0).uniform(-1.0, 1.0, A.n_rows)

    def default_trial(p):
        plan = group_levels(levels, A, cache_bytes, p)
        return 2.0 * A.nnz * p / _median_time(lambda: mpk(A_perm, x, p, plan, threads), reps) / 1e9

    trial = trial_fn or default_trial
    table = {p: float(trial(p)) for p in _p_range(cfg)}
    return {
        "command": "tune",
        "matrix_hash": matrix_hash(A),
        "cache_mb": cache_bytes / 1e6,
        "p_opt": select_p(table),
        "throughput": {str(p): t for p, t in table.items()},
    }


# ------------------------------------------------------------------ output


def _csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, default=float) + "\n"
    cmd = report["command"]
    if cmd == "mpk-bench":
        return _csv(report["p_sweep"], MPK_BENCH_COLUMNS)
    if cmd == "solve" and "study" in report:
        return _csv(report["study"], STUDY_COLUMNS)
    if cmd == "solve" and "error" in report:
        return _csv([report], ("converged", "verified", "error"))
    if cmd == "solve":
        r = {"iters": report["iterations"], "eff_spmvs": report["effective_spmv_count"],
             "baseline_s": report["baseline"]["solve_s"], "blocked_s": report["blocked"]["solve_s"],
             "speedup": report["speedup"], "converged": report["converged"],
             "verified": report["verified"]}
        return _csv([r], r.keys())
    if cmd == "levels":
        rows = [{"level": i, "size": s} for i, s in enumerate(report["level_sizes_list"])]
        return _csv(rows, ("level", "size"))
    rows = [{"p": p, "gflops": t} for p, t in report["throughput"].items()]
    return _csv(rows, ("p", "gflops"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="solver", description="Cache-blocked matrix power kernel harness")
    ap.add_argument("command", choices=("mpk-bench", "solve", "levels", "tune"))
    ap.add_argument("--matrix", required=True,
                    help="Matrix Market file or generator spec (poisson1d:N, poisson2d:NX,NY, "
                         "poisson3d:NX,NY,NZ, random:N,K[,SEED], randsym:N,K[,SEED])")
    ap.add_argument("--config", help="JSON file or inline JSON object")
    ap.add_argument("--cache-mb", type=float, default=None, help="cache size in MB (default 85)")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default MPK_NUM_THREADS or CPU count)")
    ap.add_argument("--out", help="output path (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default="json")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cache = _cache_bytes(args, cfg)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        A = parse_matrix_spec(args.matrix)
        if A.n_rows != A.n_cols:
            raise UsageError("matrix must be square")
        status = EXIT_OK
        if args.command == "mpk-bench":
            report = cmd_mpk_bench(A, cfg, cache, args.threads)
            status = EXIT_OK if report["verified"] else EXIT_NUMERICAL
        elif args.command == "solve":
            try:
                report = cmd_solve(A, cfg, cache, args.threads)
                ok = report["verified"] and report["converged"]
            except (SolverDivergence, SolverBreakdown) as exc:
                report = {"command": "solve", "matrix": matrix_stats(A), "converged": False,
                          "verified": False, "error": str(exc)}
                ok = False
            status = EXIT_OK if ok else EXIT_NUMERICAL
        elif args.command == "levels":
            report = cmd_levels(A, cfg, cache)
        else:
            report = cmd_tune(A, cfg, cache, args.threads)
            sidecar = args.out if args.out and args.format == "json" else None
            if sidecar is None:
                sidecar = f"tune-{report['matrix_hash'][:12]}.json"
                Path(sidecar).write_text(json.dumps(report, indent=2) + "\n")
            report["sidecar"] = os.fspath(sidecar)
        text = render(report, args.format)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return status
    except (UsageError, MatrixFormatError, ZeroDiagonalError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
