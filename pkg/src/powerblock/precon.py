"""Preconditioner kernels: Jacobi, two-stage Gauss-Seidel, GMRES polynomial, Chebyshev.

Each preconditioner is evaluated through a *stage chain*: a fixed sequence
of row-range stages in which stage ``j`` reads only the outputs of earlier
stages.  Running the chain with full-range sweeps gives the sequential
baseline; running it through :func:`powerblock.mpk.execute` gives the
cache-blocked variant.  Both perform the same per-row operations, so their
results agree bit for bit.
"""
from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .levels import ExecutionPlan
from .mpk import power_slices, run
from .sparse import CsrMatrix, LduSplit, invert_diagonal, split_ldu
from .spectral import arnoldi, harmonic_ritz_values, leja_order

TERMINALS = ("apply-A", "residual", "none")


class StageChain:
    """Base class for chained row-range operators.

    Subclasses set ``n_rows`` and ``n_sub`` and implement ``stage``;
    ``new_scratch`` returns per-application temporaries.
    """

    n_rows: int
    n_sub: int

    def new_scratch(self, n: int) -> dict:
        return {}

    def stage(self, j, rs, re, src, dst, scratch):  # pragma: no cover - abstract
        raise NotImplementedError

    def run(self, src, plan: ExecutionPlan | None = None, threads: int | None = None,
            guess=None, dst=None):
        """Apply the whole chain once; returns ``(dst, scratch)``."""
        src = np.ascontiguousarray(src, dtype=np.float64)
        dst = np.empty(self.n_rows) if dst is None else dst
        scratch = self.new_scratch(self.n_rows)
        if guess is not None:
            self.set_guess(scratch, guess)

        def kernel(rs, re, p, j, ws):
            self.stage(j, rs, re, src, dst, scratch)

        run(self.n_rows, kernel, None, 1, self.n_sub, plan, threads)
        return dst, scratch

    def set_guess(self, scratch, guess):
        raise TypeError(f"{type(self).__name__} does not take an initial guess")

    def apply(self, src, plan: ExecutionPlan | None = None, threads: int | None = None, guess=None):
        return self.run(src, plan, threads, guess)[0]


def _csr_args(M: CsrMatrix):
    return M.row_ptr, M.col, M.val


# --------------------------------------------------------------------- Jacobi


@dataclass(eq=False)
class JacobiPrecon:
    """``k`` Jacobi sweeps from a zero guess; ``k = 1`` is diagonal scaling.

    With ``damping`` ``w != 1`` every sweep is blended with the previous
    iterate, ``z <- w z_jacobi + (1 - w) z``.
    """

    A: CsrMatrix
    split: LduSplit
    d_inv: np.ndarray
    sweeps: int = 1
    plan: ExecutionPlan | None = None
    threads: int | None = None
    damping: float = 1.0

    @property
    def scale(self) -> np.ndarray:
        """Diagonal applied in the first sweep (``w D^-1``)."""
        return self.d_inv if self.damping == 1.0 else self.damping * self.d_inv

    @property
    def n_rows(self) -> int:
        return self.A.n_rows

    @property
    def spmv_cost(self) -> float:
        return float(self.sweeps - 1)

    def apply(self, v) -> np.ndarray:
        return jacobi_apply(self, v)

    def chain(self, terminal: str = "apply-A") -> "JacobiChain":
        return JacobiChain(self, terminal)

    def with_plan(self, plan):
        out = copy.copy(self)
        out.plan = plan
        return out


def jacobi_setup(A: CsrMatrix, sweeps: int = 1, plan=None, threads=None,
                 damping: float = 1.0) -> JacobiPrecon:
    if sweeps < 1:
        raise ValueError("Jacobi needs at least one sweep")
    if not 0.0 < damping <= 1.0:
        raise ValueError("Jacobi damping must lie in (0, 1]")
    split = split_ldu(A)
    return JacobiPrecon(A, split, split.d_inv(), int(sweeps), plan, threads, float(damping))


class JacobiChain(StageChain):
    """Stages ``z1 = D^-1 v``, then ``k-1`` Jacobi sweeps, then the terminal action.

    With one sweep and ``apply-A`` the chain is a single column-scaled SpMV.
    """

    def __init__(self, P: JacobiPrecon, terminal: str = "apply-A"):
        if terminal not in TERMINALS:
            raise ValueError(f"unknown terminal {terminal!r}")
        self.P = P
        self.terminal = terminal
        self.n_rows = P.n_rows
        self.fused = P.sweeps == 1 and terminal == "apply-A"
        self.n_sub = 1 if self.fused else P.sweeps + (terminal != "none")

    def new_scratch(self, n):
        return {"z": np.empty((self.P.sweeps + 1, n))}

    def stage(self, j, rs, re, src, dst, scratch):
        P = self.P
        if self.fused:
            kernels.spmv_scaled(*_csr_args(P.A), P.scale, src, dst, rs, re)
            return
        z = scratch["z"]
        k = P.sweeps
        if j == 0:
            z[1, rs:re] = P.scale[rs:re] * src[rs:re]
        elif j < k:
            L, U = P.split.l, P.split.u
            kernels.jacobi_sweep(*_csr_args(L), *_csr_args(U), P.d_inv, src, z[j], z[j + 1], rs, re)
            w = P.damping
            if w != 1.0:
                z[j + 1, rs:re] = w * z[j + 1, rs:re] + (1.0 - w) * z[j, rs:re]
        if j == k - 1 and self.terminal == "none":
            dst[rs:re] = z[k, rs:re]
        elif j == k:
            if self.terminal == "apply-A":
                kernels.spmv(*_csr_args(P.A), z[k], dst, rs, re)
            else:
                kernels.spmv(*_csr_args(P.A), z[k], dst, rs, re)
                dst[rs:re] = src[rs:re] - dst[rs:re]


def jacobi_apply(P: JacobiPrecon, v, plan: ExecutionPlan | None = None) -> np.ndarray:
    """``z^{k}`` of the Jacobi iteration from ``z^0 = 0``."""
    return JacobiChain(P, "none").apply(v, plan if plan is not None else P.plan, P.threads)


# ------------------------------------------------------------------------ GS2


@dataclass(eq=False)
class Gs2Precon:
    """Two-stage Gauss-Seidel with ``gamma`` inner Jacobi-Richardson iterations."""

    A: CsrMatrix
    split: LduSplit
    d_inv: np.ndarray
    gamma: int = 1
    sweeps: int = 1
    direction: str = "forward"
    plan: ExecutionPlan | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.gamma < 0 or self.sweeps < 1:
            raise ValueError("GS2 needs gamma >= 0 and at least one sweep")
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")

    @property
    def n_rows(self) -> int:
        return self.A.n_rows

    @property
    def spmv_cost(self) -> float:
        # one sweep counts as gamma + 1 triangle halves, i.e. one GS sweep at gamma = 1
        return 0.5 * self.sweeps * (self.gamma + 1)

    def apply(self, v) -> np.ndarray:
        return gs2_apply(self, v)

    def chain(self, terminal: str = "apply-A") -> "Gs2Chain":
        return Gs2Chain(self, terminal)

    def with_plan(self, plan):
        out = copy.copy(self)
        out.plan = plan
        return out

    def reversed(self) -> "Gs2Precon":
        out = copy.copy(self)
        out.direction = "backward" if self.direction == "forward" else "forward"
        return out


def gs2_setup(A: CsrMatrix, gamma: int = 1, sweeps: int = 1, direction: str = "forward",
              plan=None, threads=None) -> Gs2Precon:
    split = split_ldu(A)
    return Gs2Precon(A, split, split.d_inv(), int(gamma), int(sweeps), direction, plan, threads)


class Gs2Chain(StageChain):
    """Sub-power chain of ``sweeps`` GS2 sweeps plus an optional terminal stage.

    Sweep ``k`` is a correction step: ``g_0 = D^-1 (v - A z^k)`` (just
    ``D^-1 v`` when ``z^0 = 0``), ``g_i = g_0 - D^-1 L g_{i-1}`` for
    ``i = 1..gamma`` approximates ``(D + L)^-1 (v - A z^k)``, and
    ``z^{k+1} = z^k + g_gamma``.  Backward sweeps use ``U`` in place of ``L``.
    The terminal stage computes ``A z`` (split form ``L z + D z + U z``) or
    the residual ``v - A z``.
    """

    def __init__(self, P: Gs2Precon, terminal: str = "apply-A", with_guess: bool = False):
        if terminal not in TERMINALS:
            raise ValueError(f"unknown terminal {terminal!r}")
        self.P = P
        self.terminal = terminal
        self.with_guess = with_guess
        self.n_rows = P.n_rows
        self.per_sweep = P.gamma + 1
        self.n_sub = P.sweeps * self.per_sweep + (terminal != "none")
        self.inner_tri = P.split.l if P.direction == "forward" else P.split.u

    def new_scratch(self, n):
        return {
            "g": np.empty((self.P.sweeps, self.per_sweep, n)),
            "z": np.zeros((self.P.sweeps + 1, n)),
        }

    def set_guess(self, scratch, guess):
        if not self.with_guess:
            raise TypeError("chain was built without an initial guess")
        scratch["z"][0] = guess

    def stage(self, j, rs, re, src, dst, scratch):
        P = self.P
        K, dinv = P.sweeps, P.d_inv
        if j < K * self.per_sweep:
            k, i = divmod(j, self.per_sweep)
            g, z = scratch["g"][k], scratch["z"]
            zero_guess = k == 0 and not self.with_guess
            if i == 0:
                if zero_guess:
                    g[0, rs:re] = dinv[rs:re] * src[rs:re]
                else:
                    s = P.split
                    kernels.residual_split(*_csr_args(s.l), s.d, *_csr_args(s.u), src, z[k], g[0], rs, re)
                    g[0, rs:re] *= dinv[rs:re]
            else:
                kernels.tri_inner(*_csr_args(self.inner_tri), dinv, g[0], g[i - 1], g[i], rs, re)
            if i == P.gamma:
                if zero_guess:
                    z[1, rs:re] = g[i, rs:re]
                else:
                    z[k + 1, rs:re] = z[k, rs:re] + g[i, rs:re]
                if k == K - 1 and self.terminal == "none":
                    dst[rs:re] = z[K, rs:re]
            return
        s = P.split
        zK = scratch["z"][K]
        if self.terminal == "apply-A":
            kernels.spmv_split(*_csr_args(s.l), s.d, *_csr_args(s.u), zK, dst, rs, re)
        else:
            kernels.residual_split(*_csr_args(s.l), s.d, *_csr_args(s.u), src, zK, dst, rs, re)


def gs2_apply(P: Gs2Precon, v, plan: ExecutionPlan | None = None) -> np.ndarray:
    """``sweeps`` GS2 sweeps from a zero initial guess."""
    return Gs2Chain(P, "none").apply(v, plan if plan is not None else P.plan, P.threads)


def gs2_subpower_kernel(P: Gs2Precon, terminal: str = "apply-A") -> Gs2Chain:
    """Chained GS2 operator for MPK use (``K = 1``): ``gamma + 1`` GS2 stages
    followed by the terminal stage."""
    if P.sweeps != 1:
        raise ValueError("the chained GS2 kernel uses exactly one outer sweep")
    return Gs2Chain(P, terminal)


# ---------------------------------------------------------------- Polynomial


@dataclass(eq=False)
class PolyPrecon:
    """GMRES residual polynomial in root form.

    ``theta`` holds the Leja-ordered harmonic Ritz values (conjugate pairs
    adjacent, positive imaginary part first).  With an inner
    preconditioner ``M`` the polynomial is in ``A M^-1`` and the
    application returns ``M^-1 p(A M^-1) v``.
    """

    A: CsrMatrix
    theta: np.ndarray
    inner: object | None = None
    truncated: bool = False
    plan: ExecutionPlan | None = None
    threads: int | None = None
    p_opt: int | None = None

    @property
    def degree(self) -> int:
        return int(self.theta.size)

    @property
    def n_rows(self) -> int:
        return self.A.n_rows

    @property
    def spmv_cost(self) -> float:
        inner = 0.0 if self.inner is None else self.inner.spmv_cost
        return (self.degree - 1) * (1.0 + inner) + inner

    def operator(self) -> StageChain:
        if self.inner is None:
            return _PlainChain(self.A)
        return self.inner.chain("apply-A")

    def apply(self, v) -> np.ndarray:
        return poly_apply(self, v)

    def with_plan(self, plan):
        out = copy.copy(self)
        out.plan = plan
        if self.inner is not None and hasattr(self.inner, "with_plan"):
            out.inner = self.inner.with_plan(plan)
        return out


class _PlainChain(StageChain):
    def __init__(self, A: CsrMatrix):
        self.A = A
        self.n_rows = A.n_rows
        self.n_sub = 1

    def stage(self, j, rs, re, src, dst, scratch):
        kernels.spmv(*_csr_args(self.A), src, dst, rs, re)


def default_seed(n: int) -> np.ndarray:
    """Fixed pseudo-random Arnoldi start vector, uniform on [-1, 1]."""
    return np.random.default_rng(0).uniform(-1.0, 1.0, n)


def poly_setup_gmres(A: CsrMatrix, d: int, inner=None, seed_vector=None) -> PolyPrecon:
    """Roots of the degree-``d`` GMRES residual polynomial of ``A M^-1``.

    The Arnoldi start vector defaults to :func:`default_seed`.  Smooth
    right-hand sides make poor seeds: they barely excite the upper end of
    the spectrum, so every root lands near the origin and the polynomial
    grows without bound on the rest of the spectrum.
    """
    if d < 1:
        raise ValueError("polynomial degree must be >= 1")
    chain = _PlainChain(A) if inner is None else inner.chain("apply-A")
    seed = default_seed(A.n_rows) if seed_vector is None else np.asarray(seed_vector, dtype=np.float64)
    _, H, steps = arnoldi(chain.apply, seed, d)
    truncated = steps < d
    if truncated:
        warnings.warn(f"Arnoldi breakdown after {steps} steps; polynomial degree truncated",
                      RuntimeWarning, stacklevel=2)
    theta = harmonic_ritz_values(H)
    if np.any(np.abs(theta) == 0.0) or not np.all(np.isfinite(theta)):
        raise ValueError("zero harmonic Ritz value: operator singular on the Krylov space")
    return PolyPrecon(A, leja_order(theta), inner, truncated)


def _poly_program(theta):
    """Split Leja-ordered roots into (kind, value) steps: 'real' or 'pair'."""
    steps, i = [], 0
    while i < theta.size:
        if theta[i].imag != 0.0:
            steps.append(("pair", theta[i]))
            i += 2
        else:
            steps.append(("real", theta[i].real))
            i += 1
    return steps


def poly_apply(P: PolyPrecon, v, plan: ExecutionPlan | None = None,
               p_opt: int | None = None) -> np.ndarray:
    """Evaluate ``p(A_op) v`` in product form (``1 - z p(z) = prod (1 - z/theta_i)``).

    With a plan, every operator application is one power stage of a
    cache-blocked execution; powers are sliced into MPK calls of at most
    ``p_opt``.
    """
    plan = P.plan if plan is None else plan
    p_opt = p_opt or P.p_opt
    op = P.operator()
    n = P.n_rows
    v = np.ascontiguousarray(v, dtype=np.float64)
    acc = np.zeros(n)
    steps = _poly_program(P.theta)

    # powers: list of (src, dst, post) with post(rs, re) row-local
    powers = []
    w = v
    for idx, (kind, th) in enumerate(steps):
        last = idx == len(steps) - 1
        if kind == "real":
            if last:
                break
            t = np.empty(n)
            w_next = np.empty(n)

            def post(rs, re, w=w, t=t, w_next=w_next, th=th):
                acc[rs:re] += w[rs:re] / th
                w_next[rs:re] = w[rs:re] - t[rs:re] / th

            powers.append((w, t, post))
            w = w_next
        else:
            a, mod = th.real, th.real ** 2 + th.imag ** 2
            ca = 2.0 * a / mod
            t = np.empty(n)

            def post_a(rs, re, w=w, t=t, ca=ca, mod=mod):
                acc[rs:re] += ca * w[rs:re] - t[rs:re] / mod

            powers.append((w, t, post_a))
            if not last:
                s = np.empty(n)
                w_next = np.empty(n)

                def post_b(rs, re, w=w, t=t, s=s, w_next=w_next, ca=ca, mod=mod):
                    w_next[rs:re] = w[rs:re] - ca * t[rs:re] + s[rs:re] / mod

                powers.append((t, s, post_b))
                w = w_next

    last_sub = op.n_sub - 1
    slices = power_slices(len(powers), p_opt) if (plan is not None and p_opt and powers) else [len(powers)]
    offset = 0
    for count in slices:
        if count == 0:
            continue
        scratch = [op.new_scratch(n) for _ in range(count)]

        def kernel(rs, re, p, j, ws, offset=offset, scratch=scratch):
            src, dst, post = powers[offset + p - 1]
            op.stage(j, rs, re, src, dst, scratch[p - 1])
            if j == last_sub:
                post(rs, re)

        run(n, kernel, None, count, op.n_sub, plan, P.threads)
        offset += count

    kind, th = steps[-1]
    if kind == "real":
        acc += w / th
    if P.inner is None:
        return acc
    return P.inner.apply(acc)


# ----------------------------------------------------------------- Chebyshev


@dataclass(eq=False)
class ChebSmoother:
    """First-kind Chebyshev iteration on ``D^-1 A`` over ``[boost*lmax/ratio, boost*lmax]``."""

    A: CsrMatrix
    d_inv: np.ndarray
    lambda_max: float
    degree: int = 3
    eig_ratio: float = 30.0
    boost: float = 1.1
    plan: ExecutionPlan | None = None
    threads: int | None = None

    @property
    def n_rows(self) -> int:
        return self.A.n_rows

    @property
    def interval(self) -> tuple[float, float]:
        hi = self.boost * self.lambda_max
        return hi / self.eig_ratio, hi

    @property
    def spmv_cost(self) -> float:
        return float(self.degree - 1)

    @classmethod
    def from_interval(cls, A, lo, hi, degree, d_inv=None):
        d_inv = np.ones(A.n_rows) if d_inv is None else np.asarray(d_inv, dtype=np.float64)
        return cls(A, d_inv, float(hi), int(degree), float(hi) / float(lo), 1.0)

    def coefficients(self) -> list[tuple[float, float]]:
        """``(c1, c2)`` per step for ``d <- c1 d + c2 D^-1 r``."""
        lo, hi = self.interval
        theta, delta = 0.5 * (hi + lo), 0.5 * (hi - lo)
        coef = [(0.0, 1.0 / theta)]
        rho = delta / theta
        for _ in range(1, self.degree):
            denom = 2.0 * theta - delta * rho
            rho_new = delta / denom
            coef.append((rho_new * rho, 2.0 / denom))
            rho = rho_new
        return coef

    def chain(self, terminal: str = "none", with_guess: bool = False) -> "ChebChain":
        return ChebChain(self, terminal, with_guess)

    def apply(self, v) -> np.ndarray:
        return cheb_apply(self, v)

    def with_plan(self, plan):
        out = copy.copy(self)
        out.plan = plan
        return out


def estimate_lambda_max(A: CsrMatrix, d_inv, iters: int = 20, seed: int = 0) -> float:
    """Power iteration on ``D^-1 A`` from a fixed random start (Rayleigh quotient of the last iterate)."""
    if iters < 1:
        raise ValueError("need at least one power iteration")
    x = np.random.default_rng(seed).uniform(0.5, 1.5, A.n_rows)
    x /= np.linalg.norm(x)
    lam = 0.0
    y = np.empty(A.n_rows)
    for _ in range(iters):
        kernels.spmv(*_csr_args(A), x, y, 0, A.n_rows)
        y *= d_inv
        lam = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            break
        x = y / nrm
    return lam


def cheb_setup(A: CsrMatrix, d_inv=None, degree: int = 3, eig_ratio: float = 30.0,
               boost: float = 1.1, power_iters: int = 20, plan=None, threads=None) -> ChebSmoother:
    if degree < 1:
        raise ValueError("Chebyshev degree must be >= 1")
    if eig_ratio <= 1.0:
        raise ValueError("eig_ratio must exceed 1")
    d_inv = invert_diagonal(A.diagonal()) if d_inv is None else np.asarray(d_inv, dtype=np.float64)
    lmax = estimate_lambda_max(A, d_inv, max(20, power_iters))
    if not lmax > 0.0:
        raise ValueError(f"non-positive largest-eigenvalue estimate {lmax}")
    return ChebSmoother(A, d_inv, lmax, int(degree), float(eig_ratio), float(boost), plan, threads)


class ChebChain(StageChain):
    """One stage per Chebyshev step; optional residual stage ``b - A x``."""

    def __init__(self, S: ChebSmoother, terminal: str = "none", with_guess: bool = False):
        if terminal not in ("none", "residual"):
            raise ValueError("Chebyshev chain supports terminal 'none' or 'residual'")
        self.S = S
        self.terminal = terminal
        self.with_guess = with_guess
        self.n_rows = S.n_rows
        self.coef = S.coefficients()
        self.n_sub = S.degree + (terminal == "residual")

    def new_scratch(self, n):
        return {"x": np.zeros((self.S.degree + 1, n)), "d": np.zeros(n)}

    def set_guess(self, scratch, guess):
        if not self.with_guess:
            raise TypeError("chain was built without an initial guess")
        scratch["x"][0] = guess

    def stage(self, j, rs, re, src, dst, scratch):
        S = self.S
        x = scratch["x"]
        if j < S.degree:
            c1, c2 = self.coef[j]
            kernels.cheb_step(*_csr_args(S.A), S.d_inv, src, x[j], scratch["d"], x[j + 1],
                              c1, c2, rs, re)
            if j == S.degree - 1 and self.terminal == "none":
                dst[rs:re] = x[j + 1, rs:re]
            return
        kernels.spmv(*_csr_args(S.A), x[S.degree], dst, rs, re)
        dst[rs:re] = src[rs:re] - dst[rs:re]


def cheb_apply(S: ChebSmoother, b, x_in=None, plan: ExecutionPlan | None = None) -> np.ndarray:
    """Run ``degree`` Chebyshev steps for ``A x = b`` from ``x_in`` (zero if omitted)."""
    chain = ChebChain(S, "none", with_guess=x_in is not None)
    return chain.apply(b, plan if plan is not None else S.plan, S.threads, guess=x_in)


# ------------------------------------------------------------------ factory


class IdentityPrecon:
    spmv_cost = 0.0
    plan = None

    def __init__(self, A: CsrMatrix):
        self.A = A

    @property
    def n_rows(self):
        return self.A.n_rows

    def apply(self, v):
        return np.array(v, dtype=np.float64, copy=True)

    def chain(self, terminal="apply-A"):
        if terminal != "apply-A":
            raise ValueError("identity preconditioner chain only supports apply-A")
        return _PlainChain(self.A)

    def with_plan(self, plan):
        return self


def make_preconditioner(A: CsrMatrix, spec: dict | None, plan: ExecutionPlan | None = None,
                        threads: int | None = None, seed_vector=None):
    """Build a preconditioner from a config dict (``{"type": ..., ...}``)."""
    spec = dict(spec or {})
    kind = spec.get("type", "none")
    if kind in ("none", None):
        return IdentityPrecon(A)
    if kind == "jacobi":
        return jacobi_setup(A, int(spec.get("sweeps", 1)), plan, threads,
                            float(spec.get("damping", 1.0)))
    if kind == "gs2":
        return gs2_setup(A, int(spec.get("gamma", 1)), int(spec.get("sweeps", 1)),
                         spec.get("direction", "forward"), plan, threads)
    if kind == "poly":
        inner = spec.get("inner")
        inner_p = make_preconditioner(A, inner, plan, threads) if inner else None
        seed_kind = spec.get("seed", "random")
        if seed_kind not in ("random", "rhs"):
            raise ValueError(f"unknown polynomial seed {seed_kind!r}")
        seed = seed_vector if seed_kind == "rhs" else None
        P = poly_setup_gmres(A, int(spec.get("degree", 10)), inner_p, seed)
        P.plan, P.threads = plan, threads
        P.p_opt = spec.get("p_opt")
        return P
    if kind == "cheby":
        return cheb_setup(A, None, int(spec.get("degree", 3)), float(spec.get("eig_ratio", 30.0)),
                          float(spec.get("boost", 1.1)), plan=plan, threads=threads)
    if kind == "amg":
        from .amg import amg_setup

        smoother = spec.get("smoother", {"type": "gs2", "gamma": 1, "sweeps": 2})
        return amg_setup(A, int(spec.get("max_levels", 10)), int(spec.get("coarse_threshold", 500)),
                         smoother, plan=plan, threads=threads,
                         aggregation=spec.get("aggregation", "uncoupled"),
                         coarse_weight=float(spec.get("coarse_weight", 1.5)))
    raise ValueError(f"unknown preconditioner type {kind!r}")
