"""Arnoldi, Ritz / harmonic Ritz values and modified Leja ordering."""
from __future__ import annotations

from typing import Callable

import numpy as np


def arnoldi(apply_op: Callable[[np.ndarray], np.ndarray], v0, k: int, reorth: bool = True):
    """Run up to ``k`` Arnoldi steps with modified Gram-Schmidt.

    Returns ``(Q, H, steps)`` with ``Q`` of shape (n, steps+1) and ``H`` of
    shape (steps+1, steps).  ``steps < k`` signals breakdown (an invariant
    subspace was found).
    """
    v0 = np.asarray(v0, dtype=np.float64)
    n = v0.size
    beta = np.linalg.norm(v0)
    if beta == 0.0:
        raise ValueError("Arnoldi seed vector is zero")
    Q = np.zeros((n, k + 1))
    H = np.zeros((k + 1, k))
    Q[:, 0] = v0 / beta
    for j in range(k):
        w = np.asarray(apply_op(Q[:, j]), dtype=np.float64).copy()
        wnorm0 = np.linalg.norm(w)
        for _ in range(2 if reorth else 1):
            for i in range(j + 1):
                h = Q[:, i] @ w
                H[i, j] += h
                w -= h * Q[:, i]
        hn = np.linalg.norm(w)
        H[j + 1, j] = hn
        if hn <= 1e-14 * max(wnorm0, 1e-300):
            return Q[:, : j + 1], H[: j + 1, : j + 1], j + 1
        Q[:, j + 1] = w / hn
    return Q, H, k


def ritz_values(H: np.ndarray) -> np.ndarray:
    """Eigenvalues of the square part of an (extended) Hessenberg matrix."""
    k = H.shape[1]
    return np.linalg.eigvals(H[:k, :k])


def harmonic_ritz_values(H: np.ndarray) -> np.ndarray:
    """Harmonic Ritz values from a (k+1) x k Hessenberg matrix.

    Eigenvalues of ``H_k + h_{k+1,k}^2 f e_k^T`` with ``f = H_k^{-T} e_k``.
    A square ``H`` (breakdown) yields the plain Ritz values.
    """
    k = H.shape[1]
    Hk = H[:k, :k].copy()
    if H.shape[0] > k:
        h = H[k, k - 1]
        e = np.zeros(k)
        e[-1] = 1.0
        f = np.linalg.solve(Hk.T, e)
        Hk[:, -1] += h * h * f
    return np.linalg.eigvals(Hk)


def _clean(values, rtol: float = 1e-12) -> np.ndarray:
    z = np.asarray(values, dtype=np.complex128).copy()
    tiny = np.abs(z.imag) <= rtol * np.maximum(np.abs(z), 1e-300)
    z[tiny] = z[tiny].real
    return z


def _units(z: np.ndarray) -> list[complex]:
    """Real values and one representative (positive imaginary part) per conjugate pair."""
    reals = [complex(v) for v in z if v.imag == 0.0]
    upper = [complex(v) for v in z if v.imag > 0.0]
    lower = [complex(v) for v in z if v.imag < 0.0]
    units = list(reals)
    for v in upper:
        if lower:
            # consume the lower-half value closest to the conjugate
            k = min(range(len(lower)), key=lambda i: (abs(lower[i] - np.conj(v)), i))
            w = lower.pop(k)
            v = complex(0.5 * (v.real + w.real), 0.5 * (v.imag - w.imag))
        units.append(v)
    units.extend(np.conj(w) for w in lower)
    return units


def leja_order(values) -> np.ndarray:
    """Modified Leja ordering keeping conjugate pairs adjacent.

    Starts at the value of largest modulus; each next value maximises the
    product of distances to the values already chosen (evaluated as a sum
    of logarithms).  A complex value with positive imaginary part is
    immediately followed by its conjugate.
    """
    z = _clean(values)
    if z.size == 0:
        return z
    units = _units(z)
    out: list[complex] = []

    def take(u):
        out.append(u)
        if u.imag != 0.0:
            out.append(np.conj(u))

    first = max(range(len(units)), key=lambda i: (abs(units[i]), units[i].real, units[i].imag, -i))
    take(units.pop(first))
    while units:
        chosen = np.asarray(out)
        best, best_score = 0, -np.inf
        for i, u in enumerate(units):
            d = np.abs(u - chosen)
            score = -np.inf if np.any(d == 0.0) else float(np.sum(np.log(d)))
            if score > best_score:
                best, best_score = i, score
        take(units.pop(best))
    return np.asarray(out)


def select_shifts(values, s: int) -> np.ndarray:
    """Pick ``s`` Leja-ordered shifts, never splitting a conjugate pair.

    If a pair would straddle the end, the next real value in Leja order is
    used instead, or the pair's real part if none remains.  Fewer than
    ``s`` values are repeated cyclically.
    """
    seq = leja_order(values)
    if seq.size == 0:
        raise ValueError("no Ritz values to choose shifts from")
    out: list[complex] = []
    pos = 0
    while len(out) < s:
        z = seq[pos % seq.size]
        if z.imag == 0.0:
            out.append(z)
            pos += 1
            continue
        if len(out) + 2 <= s:
            out.extend([z, np.conj(z)])
            pos += 2
            continue
        tail = [w for w in seq[pos:] if w.imag == 0.0]
        out.append(tail[0] if tail else complex(z.real, 0.0))
    return np.asarray(out)


def truncate_shifts(shifts, k: int) -> np.ndarray:
    """First ``k`` shifts; a pair cut in half is replaced by its real part."""
    shifts = np.asarray(shifts, dtype=np.complex128)[:k].copy()
    if k and shifts[-1].imag > 0:
        shifts[-1] = shifts[-1].real
    return shifts
