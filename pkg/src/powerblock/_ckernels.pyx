# cython: language_level=3
"""Compiled row-range kernels.

Every kernel writes rows ``[rs, re)`` of its output and nothing else.  Row
sums start from 0.0 and accumulate in stored column order; the numpy
fallback in ``_pykernels`` performs the identical sequence of IEEE
operations, so both backends agree bit for bit.
"""
from libc.stdint cimport uint32_t

ctypedef const uint32_t[::1] idx_t
ctypedef const double[::1] cvec_t
ctypedef double[::1] vec_t


def spmv(idx_t ptr, idx_t col, cvec_t val, cvec_t x, vec_t y, Py_ssize_t rs, Py_ssize_t re):
    cdef Py_ssize_t r, k
    cdef double tmp
    with nogil:
        for r in range(rs, re):
            tmp = 0.0
            for k in range(ptr[r], ptr[r + 1]):
                tmp += val[k] * x[col[k]]
            y[r] = tmp


def spmv_scaled(idx_t ptr, idx_t col, cvec_t val, cvec_t s, cvec_t x, vec_t y,
                Py_ssize_t rs, Py_ssize_t re):
    cdef Py_ssize_t r, k, c
    cdef double tmp
    with nogil:
        for r in range(rs, re):
            tmp = 0.0
            for k in range(ptr[r], ptr[r + 1]):
                c = col[k]
                tmp += val[k] * (s[c] * x[c])
            y[r] = tmp


cdef inline double _split_sum(idx_t lptr, idx_t lcol, cvec_t lval, cvec_t d,
                              idx_t uptr, idx_t ucol, cvec_t uval, cvec_t x,
                              Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t k
    cdef double tmp = 0.0
    for k in range(lptr[r], lptr[r + 1]):
        tmp += lval[k] * x[lcol[k]]
    tmp += d[r] * x[r]
    for k in range(uptr[r], uptr[r + 1]):
        tmp += uval[k] * x[ucol[k]]
    return tmp


def spmv_split(idx_t lptr, idx_t lcol, cvec_t lval, cvec_t d,
               idx_t uptr, idx_t ucol, cvec_t uval, cvec_t x, vec_t y,
               Py_ssize_t rs, Py_ssize_t re):
    cdef Py_ssize_t r
    with nogil:
        for r in range(rs, re):
            y[r] = _split_sum(lptr, lcol, lval, d, uptr, ucol, uval, x, r)


def residual_split(idx_t lptr, idx_t lcol, cvec_t lval, cvec_t d,
                   idx_t uptr, idx_t ucol, cvec_t uval, cvec_t b, cvec_t x, vec_t y,
                   Py_ssize_t rs, Py_ssize_t re):
    cdef Py_ssize_t r
    with nogil:
        for r in range(rs, re):
            y[r] = b[r] - _split_sum(lptr, lcol, lval, d, uptr, ucol, uval, x, r)


def tri_inner(idx_t ptr, idx_t col, cvec_t val, cvec_t dinv, cvec_t g0, cvec_t gprev,
              vec_t gout, Py_ssize_t rs, Py_ssize_t re):
    cdef Py_ssize_t r, k
    cdef double tmp
    with nogil:
        for r in range(rs, re):
            tmp = 0.0
            for k in range(ptr[r], ptr[r + 1]):
                tmp += val[k] * gprev[col[k]]
            gout[r] = g0[r] - dinv[r] * tmp


def jacobi_sweep(idx_t lptr, idx_t lcol, cvec_t lval, idx_t uptr, idx_t ucol, cvec_t uval,
                 cvec_t dinv, cvec_t v, cvec_t zold, vec_t znew,
                 Py_ssize_t rs, Py_ssize_t re):
    cdef Py_ssize_t r, k
    cdef double tmp
    with nogil:
        for r in range(rs, re):
            tmp = 0.0
            for k in range(lptr[r], lptr[r + 1]):
                tmp += lval[k] * zold[lcol[k]]
            for k in range(uptr[r], uptr[r + 1]):
                tmp += uval[k] * zold[ucol[k]]
            znew[r] = dinv[r] * v[r] - dinv[r] * tmp


def cheb_step(idx_t ptr, idx_t col, cvec_t val, cvec_t dinv, cvec_t b, cvec_t xprev,
              vec_t d, vec_t xout, double c1, double c2, Py_ssize_t rs, Py_ssize_t re):
    cdef Py_ssize_t r, k
    cdef double tmp
    with nogil:
        for r in range(rs, re):
            tmp = 0.0
            for k in range(ptr[r], ptr[r + 1]):
                tmp += val[k] * xprev[col[k]]
            d[r] = c1 * d[r] + c2 * (dinv[r] * (b[r] - tmp))
            xout[r] = xprev[r] + d[r]
