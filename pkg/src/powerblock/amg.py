"""Plain-aggregation algebraic multigrid with a V-cycle preconditioner."""
from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .levels import ExecutionPlan
from .precon import ChebChain, Gs2Chain, Gs2Precon, cheb_setup, gs2_setup
from .sparse import CsrMatrix, csr_from_arrays

STRENGTH_THRESHOLD = 0.25
# over-correction of the coarse-grid update; unsmoothed aggregation
# under-estimates smooth error components, a weight near 1.5 compensates
COARSE_WEIGHT = 1.5


def strong_neighbors(A: CsrMatrix, theta: float = STRENGTH_THRESHOLD) -> CsrMatrix:
    """Off-diagonal entries with ``|a_ij| >= theta * sqrt(|a_ii a_jj|)``."""
    rows = A.row_indices()
    cols = A.col.astype(np.int64)
    d = np.abs(A.diagonal())
    keep = (rows != cols) & (np.abs(A.val) >= theta * np.sqrt(d[rows] * d[cols]))
    return csr_from_arrays(rows[keep], cols[keep], A.val[keep], A.n_rows, A.n_cols)


def _greedy_pass(agg, n_agg, sptr, scol, only_free_roots: bool) -> int:
    for i in range(len(agg)):
        if agg[i] >= 0:
            continue
        nb = scol[sptr[i]:sptr[i + 1]]
        if only_free_roots and any(agg[c] >= 0 for c in nb):
            continue
        agg[i] = n_agg
        for c in nb:
            if agg[c] < 0:
                agg[c] = n_agg
        n_agg += 1
    return n_agg


def aggregate(A: CsrMatrix, theta: float = STRENGTH_THRESHOLD, scheme: str = "uncoupled") -> np.ndarray:
    """Greedy plain aggregation; returns the aggregate id of every node.

    Nodes are visited in ascending order.  ``scheme="greedy"`` makes a
    single pass in which every unaggregated node starts an aggregate with
    its unaggregated strong neighbours.  ``scheme="uncoupled"`` uses three
    passes:

    1. a node whose strong neighbours are all unaggregated forms a new
       aggregate together with them;
    2. each remaining node joins the aggregate of the strong neighbour
       it is most strongly connected to;
    3. still-unaggregated nodes form new aggregates with their
       unaggregated strong neighbours.

    Single-node aggregates then join the neighbouring aggregate with the
    strongest connection, if the node has any neighbour.
    """
    n = A.n_rows
    S = strong_neighbors(A, theta)
    sptr, scol, sval = S.row_ptr.tolist(), S.col.tolist(), np.abs(S.val).tolist()
    if scheme not in ("uncoupled", "greedy"):
        raise ValueError(f"unknown aggregation scheme {scheme!r}")
    agg = [-1] * n
    n_agg = 0
    if scheme == "uncoupled":
        n_agg = _greedy_pass(agg, n_agg, sptr, scol, only_free_roots=True)
        snapshot = list(agg)
        for i in range(n):
            if agg[i] >= 0:
                continue
            best, best_w = -1, -1.0
            for k in range(sptr[i], sptr[i + 1]):
                c = scol[k]
                if snapshot[c] >= 0 and sval[k] > best_w:
                    best, best_w = snapshot[c], sval[k]
            agg[i] = best
    n_agg = _greedy_pass(agg, n_agg, sptr, scol, only_free_roots=False)

    agg = np.asarray(agg, dtype=np.int64)
    size = np.bincount(agg, minlength=n_agg)
    ptr, col, val = A.row_ptr, A.col.astype(np.int64), np.abs(A.val)
    for i in np.flatnonzero(size[agg] == 1):
        if size[agg[i]] != 1:
            continue
        c = col[ptr[i]:ptr[i + 1]]
        w = val[ptr[i]:ptr[i + 1]]
        other = (c != i) & (agg[c] != agg[i])
        if not np.any(other):
            continue
        c, w = c[other], w[other]
        j = c[np.lexsort((c, -w))[0]]
        size[agg[i]] -= 1
        agg[i] = agg[j]
        size[agg[j]] += 1

    _, agg = np.unique(agg, return_inverse=True)
    return agg.astype(np.int64)


def prolongator(agg: np.ndarray, n_coarse: int) -> CsrMatrix:
    n = agg.size
    return CsrMatrix(n, n_coarse, np.arange(n + 1, dtype=np.uint32), agg.astype(np.uint32), np.ones(n))


def galerkin(A: CsrMatrix, agg: np.ndarray, n_coarse: int) -> CsrMatrix:
    """``P^T A P`` for the piecewise-constant prolongator of ``agg``."""
    rows = agg[A.row_indices()]
    cols = agg[A.col.astype(np.int64)]
    return csr_from_arrays(rows, cols, A.val, n_coarse, n_coarse)


def transpose(M: CsrMatrix) -> CsrMatrix:
    return csr_from_arrays(M.col.astype(np.int64), M.row_indices(), M.val, M.n_cols, M.n_rows)


@dataclass(eq=False)
class AmgLevel:
    A: CsrMatrix
    P: CsrMatrix | None = None
    R: CsrMatrix | None = None
    agg: np.ndarray | None = None
    pre: object | None = None
    post: object | None = None
    plan: ExecutionPlan | None = None


@dataclass(eq=False)
class AmgHierarchy:
    """Grid hierarchy; the last level is solved directly with a dense LU."""

    levels: list[AmgLevel]
    lu: tuple
    max_levels: int
    coarse_threshold: int
    smoother: dict = field(default_factory=dict)
    threads: int | None = None
    coarse_weight: float = COARSE_WEIGHT
    aggregation: str = "uncoupled"

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def n_rows(self) -> int:
        return self.levels[0].A.n_rows

    @property
    def plan(self) -> ExecutionPlan | None:
        return self.levels[0].plan

    @property
    def spmv_cost(self) -> float:
        """Approximate finest-level SpMV equivalents per V-cycle.

        Pre- plus post-smoothing plus the residual on every non-coarsest
        level, weighted by that level's share of finest-level nonzeros.
        """
        kind = self.smoother.get("type", "gs2")
        if self.n_levels == 1:
            return 0.0
        if kind == "gs2":
            K, g = int(self.smoother.get("sweeps", 2)), int(self.smoother.get("gamma", 1))
            smooth = K * (g + 1)  # pre + post, gamma + 1 triangle halves per sweep
        else:
            smooth = 2 * int(self.smoother.get("degree", 3)) - 1
        nnz0 = self.levels[0].A.nnz
        return sum(lv.A.nnz / nnz0 for lv in self.levels[:-1]) * (smooth + 1.0)

    def apply(self, v) -> np.ndarray:
        return amg_vcycle(self, v)

    def chain(self, terminal="apply-A"):
        raise NotImplementedError("AMG is used with classical GMRES only")

    def with_plan(self, plan: ExecutionPlan | None) -> "AmgHierarchy":
        out = copy.copy(self)
        out.levels = list(self.levels)
        out.levels[0] = copy.copy(self.levels[0])
        out.levels[0].plan = plan
        return out


def _smoothers(A: CsrMatrix, spec: dict):
    kind = spec.get("type", "gs2")
    if kind == "gs2":
        P = gs2_setup(A, int(spec.get("gamma", 1)), int(spec.get("sweeps", 2)), "forward")
        return P, P.reversed()
    if kind == "cheby":
        S = cheb_setup(A, None, int(spec.get("degree", 3)), float(spec.get("eig_ratio", 30.0)),
                       float(spec.get("boost", 1.1)))
        return S, S
    raise ValueError(f"unknown AMG smoother {kind!r}")


def amg_setup(A: CsrMatrix, max_levels: int = 10, coarse_threshold: int = 500,
              smoother_spec: dict | None = None, plan: ExecutionPlan | None = None,
              threads: int | None = None, aggregation: str = "uncoupled",
              coarse_weight: float = COARSE_WEIGHT) -> AmgHierarchy:
    """Build the hierarchy.

    Parameters
    ----------
    A : CsrMatrix
        Square system matrix; level-ordered when ``plan`` is given.
    max_levels, coarse_threshold : int
        Coarsening stops at ``max_levels`` levels or once a level has at
        most ``coarse_threshold`` rows.
    smoother_spec : dict, optional
        ``{"type": "gs2", "gamma": g, "sweeps": K}`` (default ``g = 1``,
        ``K = 2``) or ``{"type": "cheby", "degree": d, ...}``.
    plan : ExecutionPlan, optional
        Enables cache-blocked smoothing on the finest level.
    aggregation : {"uncoupled", "greedy"}
        Aggregation scheme, see :func:`aggregate`.
    coarse_weight : float
        Scale of the prolongated coarse correction.
    """
    if A.n_rows != A.n_cols:
        raise ValueError("AMG needs a square matrix")
    if max_levels < 1:
        raise ValueError("max_levels must be >= 1")
    spec = dict(smoother_spec or {"type": "gs2", "gamma": 1, "sweeps": 2})
    levels = [AmgLevel(A, plan=plan)]
    while len(levels) < max_levels and levels[-1].A.n_rows > coarse_threshold:
        lv = levels[-1]
        agg = aggregate(lv.A, scheme=aggregation)
        nc = int(agg.max()) + 1 if agg.size else 0
        if nc >= lv.A.n_rows:
            warnings.warn("AMG coarsening stagnated; stopping recursion", RuntimeWarning, stacklevel=2)
            break
        lv.agg = agg
        lv.P = prolongator(agg, nc)
        lv.R = transpose(lv.P)
        levels.append(AmgLevel(galerkin(lv.A, agg, nc)))
    for lv in levels[:-1]:
        lv.pre, lv.post = _smoothers(lv.A, spec)
    lu = scipy.linalg.lu_factor(levels[-1].A.to_dense())
    return AmgHierarchy(levels, lu, int(max_levels), int(coarse_threshold), spec, threads,
                        float(coarse_weight), aggregation)


def _pre_smooth(lv: AmgLevel, b, threads):
    """Pre-smoothing from a zero guess fused with the residual; returns (x, r)."""
    S = lv.pre
    if isinstance(S, Gs2Precon):
        chain = Gs2Chain(S, "residual")
        r, scratch = chain.run(b, lv.plan, threads)
        return scratch["z"][S.sweeps], r
    chain = ChebChain(S, "residual")
    r, scratch = chain.run(b, lv.plan, threads)
    return scratch["x"][S.degree], r


def _post_smooth(lv: AmgLevel, b, x, threads):
    S = lv.post
    chain = Gs2Chain(S, "none", with_guess=True) if isinstance(S, Gs2Precon) else ChebChain(S, "none", True)
    return chain.apply(b, lv.plan, threads, guess=x)


def _cycle(H: AmgHierarchy, k: int, b: np.ndarray) -> np.ndarray:
    lv = H.levels[k]
    if k == H.n_levels - 1:
        return scipy.linalg.lu_solve(H.lu, b)
    x, r = _pre_smooth(lv, b, H.threads)
    rc = np.empty(lv.R.n_rows)
    kernels.spmv(lv.R.row_ptr, lv.R.col, lv.R.val, r, rc, 0, lv.R.n_rows)
    c = _cycle(H, k + 1, rc)
    x = x + H.coarse_weight * c[lv.agg]
    return _post_smooth(lv, b, x, H.threads)


def amg_vcycle(H: AmgHierarchy, v) -> np.ndarray:
    """One V-cycle for ``A z = v`` with zero initial guess on every level."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.size != H.n_rows:
        raise ValueError("vector length does not match the hierarchy")
    return _cycle(H, 0, v)
