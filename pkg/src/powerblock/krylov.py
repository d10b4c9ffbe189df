"""Right-preconditioned restarted GMRES and s-step GMRES with a Newton basis."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .levels import DEFAULT_CACHE_MB, ExecutionPlan
from .mpk import mpk_shifted, normalize_shifts
from .precon import Gs2Precon, IdentityPrecon, JacobiPrecon
from .sparse import CsrMatrix, spmv
from .spectral import arnoldi, ritz_values, select_shifts, truncate_shifts

RANK_TOL = 1e-14


class SolverDivergence(ArithmeticError):
    """Non-finite residual encountered."""


class SolverBreakdown(ArithmeticError):
    """s-step block stayed rank deficient after shrinking."""


@dataclass
class SolverConfig:
    kind: str = "gmres"
    m: int = 50
    s: int = 4
    tol: float = 1e-8
    max_iters: int = 1000
    precon: dict | None = None
    mpk_enabled: bool = True
    cache_bytes: float = DEFAULT_CACHE_MB * 1e6
    p_opt: int | None = None
    ortho_sweeps: int = 1
    warmup: int | None = None

    def __post_init__(self):
        if self.kind not in ("gmres", "sstep_gmres"):
            raise ValueError(f"unknown solver type {self.kind!r}")
        if self.m < 1 or not 1 <= self.s <= self.m:
            raise ValueError("need 1 <= s <= m")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.ortho_sweeps < 1 or self.max_iters < 0:
            raise ValueError("ortho_sweeps >= 1 and max_iters >= 0 required")

    @classmethod
    def from_dict(cls, cfg: dict) -> "SolverConfig":
        """Accept ``{"solver": {...}, "precon": {...}, "mpk": {...}}`` or a flat solver dict."""
        solver = dict(cfg.get("solver", cfg))
        mpk = dict(cfg.get("mpk", {}))
        kw = {
            "kind": solver.get("type", "gmres"),
            "m": int(solver.get("m", 50)),
            "s": int(solver.get("s", 4 if solver.get("type") == "sstep_gmres" else 1)),
            "tol": float(solver.get("tol", 1e-8)),
            "max_iters": int(solver.get("max_iters", 1000)),
            "ortho_sweeps": int(solver.get("ortho_sweeps", 1)),
            "warmup": solver.get("warmup"),
            "precon": cfg.get("precon"),
            "mpk_enabled": bool(mpk.get("enabled", True)),
            "p_opt": mpk.get("p_opt"),
        }
        if "cache_mb" in mpk:
            kw["cache_bytes"] = float(mpk["cache_mb"]) * 1e6
        return cls(**kw)


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list[float]
    x: np.ndarray
    timings: dict = field(default_factory=lambda: {"mpk": 0.0, "ortho": 0.0, "misc": 0.0})
    effective_spmv_count: float = 0.0
    restarts: int = 0
    final_residual: float = float("nan")
    shifts: list | None = None
    config: dict = field(default_factory=dict)
    basis: np.ndarray | None = field(default=None, repr=False)
    hessenberg: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "effective_spmv_count": self.effective_spmv_count,
            "restarts": self.restarts,
            "timings": dict(self.timings),
            "residual_history": [float(r) for r in self.residual_history],
            "config": self.config,
        }
        if self.shifts is not None:
            out["shifts"] = [[float(np.real(z)), float(np.imag(z))] for z in self.shifts]
        return out


class _Timer:
    def __init__(self, timings, key):
        self.timings, self.key = timings, key

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.timings[self.key] += time.perf_counter() - self.t0


# ------------------------------------------------------------ building blocks


def icgs_block_ortho(Q: np.ndarray, V: np.ndarray, sweeps: int = 1) -> np.ndarray:
    """Project the columns of ``V`` (in place) off the orthonormal columns of ``Q``.

    ``V <- V - Q (Q^T V)`` is repeated ``sweeps`` times; the accumulated
    coefficient block ``(k, b)`` is returned.
    """
    C = np.zeros((Q.shape[1], V.shape[1]))
    for _ in range(sweeps):
        c = Q.T @ V
        V -= Q @ c
        C += c
    return C


def _tsqr_tree(V: np.ndarray, panels: int):
    if panels <= 1:
        return np.linalg.qr(V)
    half = panels // 2
    split = (V.shape[0] * half) // panels
    Q1, R1 = _tsqr_tree(V[:split], half)
    Q2, R2 = _tsqr_tree(V[split:], panels - half)
    Qc, R = np.linalg.qr(np.vstack([R1, R2]))
    b = R1.shape[0]
    return np.vstack([Q1 @ Qc[:b], Q2 @ Qc[b:]]), R


def tsqr(V: np.ndarray, panels: int | None = None):
    """Tall-skinny QR by a binary reduction tree over row panels.

    Returns ``(Q, R)`` with ``R`` upper triangular and ``diag(R) >= 0``.
    Results are deterministic for a fixed panel count (default: up to 8
    panels of at least ``4 * cols`` rows each).
    """
    V = np.asarray(V, dtype=np.float64)
    n, b = V.shape
    if n < b:
        raise ValueError("tsqr needs at least as many rows as columns")
    if panels is None:
        panels = max(1, min(8, n // max(4 * b, 1)))
    panels = max(1, min(panels, n // max(b, 1)))
    Q, R = _tsqr_tree(V, panels)
    sign = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * sign, R * sign[:, None]


def rank_deficiency(R: np.ndarray, scale: float, rtol: float = RANK_TOL) -> int | None:
    """Index of the first diagonal entry of ``R`` below ``rtol * scale``, else ``None``."""
    small = np.flatnonzero(np.abs(np.diag(R)) <= rtol * scale)
    return int(small[0]) if small.size else None


def _operator(A: CsrMatrix, precon):
    def apply(v):
        return spmv(A, precon.apply(v))

    return apply


def compute_newton_shifts(A: CsrMatrix, precon=None, s: int = 4, warmup_iters: int | None = None,
                          m: int = 50, seed_vector=None) -> np.ndarray:
    """Newton-basis shifts: Leja-ordered Ritz values of a short Arnoldi run.

    ``warmup_iters`` defaults to ``2 s`` capped at ``m``.  The seed is the
    right-hand side if given, else the all-ones vector.
    """
    precon = IdentityPrecon(A) if precon is None else precon
    warm = min(2 * s, m) if warmup_iters is None else int(warmup_iters)
    if warm < s:
        raise ValueError("warmup_iters must be >= s")
    seed = np.ones(A.n_rows) if seed_vector is None else np.asarray(seed_vector, dtype=np.float64)
    if not np.any(seed):
        seed = np.ones(A.n_rows)
    _, H, _ = arnoldi(_operator(A, precon), seed, warm)
    return select_shifts(ritz_values(H), s)


class _Givens:
    """Incremental QR of the Hessenberg matrix for the GMRES least-squares problem."""

    def __init__(self, m: int, beta: float):
        self.c = np.zeros(m)
        self.s = np.zeros(m)
        self.g = np.zeros(m + 1)
        self.g[0] = beta
        self.R = np.zeros((m + 1, m))

    def add_column(self, j: int, h: np.ndarray) -> float:
        """Append column ``j`` (entries ``0..j+1``); return the new residual norm."""
        h = h.copy()
        for i in range(j):
            t = self.c[i] * h[i] + self.s[i] * h[i + 1]
            h[i + 1] = -self.s[i] * h[i] + self.c[i] * h[i + 1]
            h[i] = t
        a, b = h[j], h[j + 1]
        r = np.hypot(a, b)
        if r == 0.0:
            self.c[j], self.s[j] = 1.0, 0.0
        else:
            self.c[j], self.s[j] = a / r, b / r
        h[j], h[j + 1] = r, 0.0
        self.R[: j + 2, j] = h[: j + 2]
        self.g[j + 1] = -self.s[j] * self.g[j]
        self.g[j] = self.c[j] * self.g[j]
        return abs(self.g[j + 1])

    def solve(self, k: int) -> np.ndarray:
        if k == 0:
            return np.zeros(0)
        return scipy.linalg.solve_triangular(self.R[:k, :k], self.g[:k])


def _check_finite(value: float):
    if not np.isfinite(value):
        raise SolverDivergence("non-finite residual")


def _start(A, b, x0, precon):
    b = np.asarray(b, dtype=np.float64)
    if A.n_rows != A.n_cols or b.size != A.n_rows:
        raise ValueError("A must be square and match b")
    precon = IdentityPrecon(A) if precon is None else precon
    x = np.zeros(A.n_rows) if x0 is None else np.array(x0, dtype=np.float64)
    bnorm = float(np.linalg.norm(b))
    return b, x, precon, (bnorm if bnorm > 0 else 1.0)


# ------------------------------------------------------------------- GMRES


def gmres(A: CsrMatrix, b, x0=None, cfg: SolverConfig | None = None, precon=None) -> SolveReport:
    """Restarted GMRES(m) with right preconditioning and ICGS Arnoldi."""
    cfg = SolverConfig() if cfg is None else cfg
    b, x, precon, denom = _start(A, b, x0, precon)
    timings = {"mpk": 0.0, "ortho": 0.0, "misc": 0.0}
    t_start = time.perf_counter()
    m, n = cfg.m, A.n_rows
    r = b - spmv(A, x)
    res = float(np.linalg.norm(r)) / denom
    _check_finite(res)
    history = [res]
    its = restarts = 0
    converged = res <= cfg.tol
    V = H = None
    k = 0
    while not converged and its < cfg.max_iters:
        beta = float(np.linalg.norm(r))
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        V[0] = r / beta
        giv = _Givens(m, beta)
        k = 0
        happy = False
        for j in range(m):
            with _Timer(timings, "mpk"):
                w = spmv(A, precon.apply(V[j]))
            with _Timer(timings, "ortho"):
                Q = V[: j + 1].T
                wv = w[:, None]
                H[: j + 1, j] = icgs_block_ortho(Q, wv, cfg.ortho_sweeps)[:, 0]
                hn = float(np.linalg.norm(w))
            H[j + 1, j] = hn
            est = giv.add_column(j, H[: j + 2, j]) / denom
            _check_finite(est)
            history.append(est)
            its += 1
            k = j + 1
            happy = hn <= RANK_TOL * max(float(np.linalg.norm(H[: j + 1, j])), 1e-300)
            if not happy:
                V[j + 1] = w / hn
            if est <= cfg.tol or happy or its >= cfg.max_iters:
                break
        y = giv.solve(k)
        x += precon.apply(V[:k].T @ y)
        r = b - spmv(A, x)
        true = float(np.linalg.norm(r)) / denom
        _check_finite(true)
        converged = true <= cfg.tol or (happy and true <= max(cfg.tol, 1e-12))
        if not converged:
            restarts += 1
        res = true
    timings["misc"] = max(0.0, time.perf_counter() - t_start - timings["mpk"] - timings["ortho"])
    return SolveReport(
        converged=bool(converged), iterations=its, residual_history=history, x=x,
        timings=timings, effective_spmv_count=its * (1.0 + precon.spmv_cost),
        restarts=restarts, final_residual=res, config=asdict(cfg),
        basis=None if V is None else V[: k + 1], hessenberg=None if H is None else H[: k + 1, :k],
    )


# ------------------------------------------------------------ s-step GMRES


def _change_of_basis(shifts) -> np.ndarray:
    """``(k+1, k)`` matrix ``B`` with ``A_op Y[:, :k] = Y B`` for a Newton block."""
    re_part, pair = normalize_shifts(shifts)
    k = re_part.size
    B = np.zeros((k + 1, k))
    for c in range(k):
        B[c, c] = re_part[c]
        B[c + 1, c] = 1.0
        if pair[c] != 0.0:
            B[c - 1, c] = -pair[c]
    return B


def chain_for(precon):
    """Chained ``A M^-1`` operator for the s-step path (Jacobi, GS2 or none)."""
    if not isinstance(precon, (IdentityPrecon, JacobiPrecon, Gs2Precon)):
        raise ValueError(f"s-step GMRES supports Jacobi, GS2 or no preconditioner, not {type(precon).__name__}")
    return precon.chain("apply-A")


def sstep_gmres(A: CsrMatrix, b, x0=None, cfg: SolverConfig | None = None, precon=None,
                plan: ExecutionPlan | None = None, shifts=None) -> SolveReport:
    """s-step GMRES: Newton-basis MPK blocks, block ICGS, TSQR, per-block convergence check.

    With ``cfg.mpk_enabled`` and a ``plan`` the MPK runs cache-blocked; ``A``,
    ``b`` and the preconditioner must then be in the plan's level order.
    """
    cfg = SolverConfig(kind="sstep_gmres") if cfg is None else cfg
    b, x, precon, denom = _start(A, b, x0, precon)
    timings = {"mpk": 0.0, "ortho": 0.0, "misc": 0.0}
    t_start = time.perf_counter()
    m, s, n = cfg.m, cfg.s, A.n_rows
    chain = chain_for(precon)
    mpk_plan = plan if cfg.mpk_enabled else None
    if shifts is None:
        shifts = compute_newton_shifts(A, precon, s, cfg.warmup, m, b)
    shifts = np.asarray(shifts, dtype=np.complex128)
    if shifts.size != s:
        raise ValueError("need exactly s shifts")

    r = b - spmv(A, x)
    res = float(np.linalg.norm(r)) / denom
    _check_finite(res)
    history = [res]
    its = restarts = 0
    converged = res <= cfg.tol
    V = H = None
    j = 0
    while not converged and its < cfg.max_iters:
        beta = float(np.linalg.norm(r))
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        V[0] = r / beta
        giv = _Givens(m, beta)
        j = 0
        happy = False
        while j < m and its < cfg.max_iters:
            sb = min(s, m - j, cfg.max_iters - its)
            retried = False
            while True:
                sh = truncate_shifts(shifts, sb)
                with _Timer(timings, "mpk"):
                    Y = mpk_shifted(chain, sh, V[j], sb, mpk_plan)
                with _Timer(timings, "ortho"):
                    W = Y[1:].T
                    scale = float(np.linalg.norm(W))
                    C = icgs_block_ortho(V[: j + 1].T, W, cfg.ortho_sweeps)
                    Qb, Rb = tsqr(W)
                bad = rank_deficiency(Rb, max(scale, 1e-300))
                if bad is None or bad == sb - 1:
                    break
                if retried:
                    raise SolverBreakdown(f"block rank deficient at column {bad} after shrinking")
                retried, sb = True, bad + 1
            # basis-change fold: H_new = (Rf B - pad(H_old T_top)) T_low^-1
            Rf = np.zeros((j + 1 + sb, sb + 1))
            Rf[j, 0] = 1.0
            Rf[: j + 1, 1:] = C
            Rf[j + 1:, 1:] = Rb
            T = Rf[: j + sb, :sb]
            rhs = Rf @ _change_of_basis(sh)
            if j:
                rhs[: j + 1] -= H[: j + 1, :j] @ T[:j]
            Hnew = np.linalg.solve(T[j:].T, rhs.T).T
            H[: j + sb + 1, j:j + sb] = Hnew
            V[j + 1:j + sb + 1] = Qb.T
            for c in range(sb):
                est = giv.add_column(j + c, H[: j + c + 2, j + c]) / denom
                _check_finite(est)
                history.append(est)
            its += sb
            j += sb
            happy = bad is not None
            if est <= cfg.tol or happy:
                break
        y = giv.solve(j)
        x += precon.apply(V[:j].T @ y)
        r = b - spmv(A, x)
        true = float(np.linalg.norm(r)) / denom
        _check_finite(true)
        converged = true <= cfg.tol or (happy and true <= max(cfg.tol, 1e-12))
        if not converged:
            restarts += 1
        res = true
    timings["misc"] = max(0.0, time.perf_counter() - t_start - timings["mpk"] - timings["ortho"])
    return SolveReport(
        converged=bool(converged), iterations=its, residual_history=history, x=x,
        timings=timings, effective_spmv_count=its * (1.0 + precon.spmv_cost),
        restarts=restarts, final_residual=res, shifts=list(shifts), config=asdict(cfg),
        basis=None if V is None else V[: j + 1], hessenberg=None if H is None else H[: j + 1, :j],
    )


def solve(A: CsrMatrix, b, cfg: SolverConfig, precon=None, plan: ExecutionPlan | None = None,
          x0=None) -> SolveReport:
    """Dispatch on ``cfg.kind``."""
    if cfg.kind == "gmres":
        return gmres(A, b, x0, cfg, precon)
    return sstep_gmres(A, b, x0, cfg, precon, plan)
