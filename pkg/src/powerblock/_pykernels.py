"""Pure numpy implementations of the row-range kernels.

Signatures and floating-point operation order mirror ``_ckernels.pyx``.  Row
sums are vectorised across rows but walk each row's nonzeros strictly left
to right (``acc = 0.0; acc += v * x`` per column slot), so the results are
bitwise identical to the compiled loops.
"""
import numpy as np


def _accumulate(acc, ptr, col, val, x, rs, re, s=None):
    """Add row sums of rows [rs, re) into ``acc`` one column slot at a time."""
    if acc.size == 0:
        return acc
    start = ptr[rs:re].astype(np.int64)
    lens = ptr[rs + 1:re + 1].astype(np.int64) - start
    dense_until = int(lens.min())
    act = None
    for k in range(int(lens.max())):
        if k < dense_until:
            idx = start + k
            c = col[idx]
            acc += val[idx] * (x[c] if s is None else s[c] * x[c])
            continue
        act = np.flatnonzero(lens > k) if act is None else act[lens[act] > k]
        idx = start[act] + k
        c = col[idx]
        acc[act] += val[idx] * (x[c] if s is None else s[c] * x[c])
    return acc


def _rowsum(ptr, col, val, x, rs, re, s=None):
    return _accumulate(np.zeros(re - rs), ptr, col, val, x, rs, re, s)


def _split_sum(lptr, lcol, lval, d, uptr, ucol, uval, x, rs, re):
    acc = _rowsum(lptr, lcol, lval, x, rs, re)
    acc += d[rs:re] * x[rs:re]
    return _accumulate(acc, uptr, ucol, uval, x, rs, re)


def spmv(ptr, col, val, x, y, rs, re):
    y[rs:re] = _rowsum(ptr, col, val, x, rs, re)


def spmv_scaled(ptr, col, val, s, x, y, rs, re):
    y[rs:re] = _rowsum(ptr, col, val, x, rs, re, s)


def spmv_split(lptr, lcol, lval, d, uptr, ucol, uval, x, y, rs, re):
    y[rs:re] = _split_sum(lptr, lcol, lval, d, uptr, ucol, uval, x, rs, re)


def residual_split(lptr, lcol, lval, d, uptr, ucol, uval, b, x, y, rs, re):
    y[rs:re] = b[rs:re] - _split_sum(lptr, lcol, lval, d, uptr, ucol, uval, x, rs, re)


def tri_inner(ptr, col, val, dinv, g0, gprev, gout, rs, re):
    gout[rs:re] = g0[rs:re] - dinv[rs:re] * _rowsum(ptr, col, val, gprev, rs, re)


def jacobi_sweep(lptr, lcol, lval, uptr, ucol, uval, dinv, v, zold, znew, rs, re):
    tmp = _rowsum(lptr, lcol, lval, zold, rs, re)
    _accumulate(tmp, uptr, ucol, uval, zold, rs, re)
    di = dinv[rs:re]
    znew[rs:re] = di * v[rs:re] - di * tmp


def cheb_step(ptr, col, val, dinv, b, xprev, d, xout, c1, c2, rs, re):
    tmp = _rowsum(ptr, col, val, xprev, rs, re)
    d[rs:re] = c1 * d[rs:re] + c2 * (dinv[rs:re] * (b[rs:re] - tmp))
    xout[rs:re] = xprev[rs:re] + d[rs:re]
