"""Compressed-row sparse matrices, Matrix Market I/O and test-matrix generators."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels

INDEX_DTYPE = np.uint32
MAX_NNZ = 2**31 - 1


class MatrixFormatError(ValueError):
    """Raised for malformed matrix input (bad indices, bad Matrix Market files)."""


class ZeroDiagonalError(ValueError):
    """Raised when an operation needs D^-1 but the diagonal has a zero."""


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Compressed-row matrix with 32-bit indices and float64 values.

    Column indices are sorted ascending within every row; that fixes the
    accumulation order of all row sums in the package.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col: np.ndarray
    val: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def nnzr(self) -> float:
        return self.nnz / self.n_rows if self.n_rows else 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_ptr.astype(np.int64))

    def row_indices(self) -> np.ndarray:
        """Row index of every stored nonzero (COO row array)."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), self.row_lengths())

    def check(self) -> None:
        """Raise :class:`MatrixFormatError` if an invariant is violated."""
        rp = self.row_ptr.astype(np.int64)
        if rp.shape != (self.n_rows + 1,) or rp[0] != 0:
            raise MatrixFormatError("row_ptr must have n_rows+1 entries starting at 0")
        if np.any(np.diff(rp) < 0):
            raise MatrixFormatError("row_ptr must be non-decreasing")
        if rp[-1] != self.col.size or self.col.size != self.val.size:
            raise MatrixFormatError("row_ptr[-1] must equal nnz")
        if self.col.size and int(self.col.max()) >= self.n_cols:
            raise MatrixFormatError("column index out of range")
        c = self.col.astype(np.int64)
        same_row = np.diff(self.row_indices()) == 0
        if np.any(np.diff(c)[same_row] <= 0):
            raise MatrixFormatError("columns must be strictly increasing within rows")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_indices(), self.col.astype(np.int64)] = self.val
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csr_matrix(
            (self.val, self.col.astype(np.int64), self.row_ptr.astype(np.int64)),
            shape=self.shape,
        )

    @classmethod
    def from_scipy(cls, M) -> "CsrMatrix":
        coo = M.tocoo()
        return csr_from_arrays(coo.row, coo.col, coo.data, *coo.shape)

    @classmethod
    def from_dense(cls, D, drop_zeros: bool = True) -> "CsrMatrix":
        D = np.asarray(D, dtype=np.float64)
        r, c = np.nonzero(D) if drop_zeros else np.indices(D.shape).reshape(2, -1)
        return csr_from_arrays(r, c, D[r, c], *D.shape)

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape))
        rows = self.row_indices()
        mask = rows == self.col
        d[rows[mask]] = self.val[mask]
        return d

    def equals(self, other: "CsrMatrix") -> bool:
        """Bitwise structural and value equality."""
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col, other.col)
            and np.array_equal(self.val.view(np.uint64), other.val.view(np.uint64))
        )


@dataclass(frozen=True, eq=False)
class LduSplit:
    """Strictly lower part, diagonal and strictly upper part of a square matrix."""

    l: CsrMatrix
    d: np.ndarray
    u: CsrMatrix
    d_stored: np.ndarray | None = None  # rows whose diagonal is a stored entry

    def d_inv(self) -> np.ndarray:
        return invert_diagonal(self.d)

    def reassemble(self) -> CsrMatrix:
        rows = np.concatenate([self.l.row_indices(), self.u.row_indices()])
        cols = np.concatenate([self.l.col, self.u.col]).astype(np.int64)
        vals = np.concatenate([self.l.val, self.u.val])
        nz = np.flatnonzero(self.d if self.d_stored is None else self.d_stored)
        n = self.l.n_rows
        return csr_from_arrays(
            np.concatenate([rows, nz]), np.concatenate([cols, nz]),
            np.concatenate([vals, self.d[nz]]), n, n,
        )


def invert_diagonal(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    zero = np.flatnonzero(d == 0.0)
    if zero.size:
        raise ZeroDiagonalError(f"zero diagonal entry in row {int(zero[0])}")
    return 1.0 / d


def csr_from_arrays(rows, cols, vals, n_rows: int, n_cols: int) -> CsrMatrix:
    """Build a :class:`CsrMatrix` from COO arrays, summing duplicates."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=np.float64).ravel()
    if not (rows.size == cols.size == vals.size):
        raise MatrixFormatError("COO arrays must have equal length")
    if n_rows < 0 or n_cols < 0 or n_rows >= 2**32 or n_cols >= 2**32:
        raise MatrixFormatError("matrix dimensions must fit 32-bit unsigned indices")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols:
            raise MatrixFormatError("coordinate index out of range")
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        first = np.ones(rows.size, dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(first)
        if starts.size != rows.size:
            # np.add.at accumulates strictly in input order (reduceat may not)
            summed = np.zeros(starts.size)
            np.add.at(summed, np.cumsum(first) - 1, vals)
            vals = summed
            rows, cols = rows[starts], cols[starts]
    if rows.size > MAX_NNZ:
        raise MatrixFormatError("nnz exceeds 32-bit index range")
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=row_ptr[1:])
    return CsrMatrix(
        int(n_rows), int(n_cols),
        row_ptr.astype(INDEX_DTYPE), cols.astype(INDEX_DTYPE), np.ascontiguousarray(vals),
    )


def csr_from_coo(entries, n_rows: int, n_cols: int) -> CsrMatrix:
    """Build a matrix from ``(row, col, value)`` triples; duplicates are summed."""
    entries = list(entries)
    if not entries:
        return csr_from_arrays([], [], [], n_rows, n_cols)
    r, c, v = zip(*entries)
    return csr_from_arrays(r, c, v, n_rows, n_cols)


def read_matrix_market(path, require_square: bool = False) -> CsrMatrix:
    """Read a Matrix Market coordinate file (real/integer/pattern, general/symmetric).

    Symmetric storage is expanded; pattern entries get the value 1.0.
    """
    path = Path(path)
    with open(path, "r") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0].lower() != "%%matrixmarket":
            raise MatrixFormatError(f"{path}: missing %%MatrixMarket header")
        obj, fmt, field, sym = (h.lower() for h in header[1:])
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixFormatError(f"{path}: only 'matrix coordinate' is supported")
        if field not in ("real", "integer", "pattern", "double"):
            raise MatrixFormatError(f"{path}: unsupported field '{field}'")
        if sym not in ("general", "symmetric"):
            raise MatrixFormatError(f"{path}: unsupported symmetry '{sym}'")
        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
        try:
            n_rows, n_cols, nnz = (int(t) for t in line.split())
        except ValueError as exc:
            raise MatrixFormatError(f"{path}: bad size line {line!r}") from exc
        ncol = 2 if field == "pattern" else 3
        text = "".join(ln for ln in fh if not ln.startswith("%"))
    try:
        flat = np.array(text.split(), dtype=np.float64)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: malformed entry lines") from exc
    if flat.size != nnz * ncol:
        raise MatrixFormatError(f"{path}: expected {nnz} entries with {ncol} columns")
    body = flat.reshape(nnz, ncol)
    if require_square and n_rows != n_cols:
        raise MatrixFormatError(f"{path}: matrix is not square")
    rows = body[:, 0].astype(np.int64) - 1
    cols = body[:, 1].astype(np.int64) - 1
    vals = np.ones(nnz) if field == "pattern" else body[:, 2].copy()
    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    return csr_from_arrays(rows, cols, vals, n_rows, n_cols)


def write_matrix_market(A: CsrMatrix, path) -> None:
    """Write ``A`` as a general real coordinate file with round-trip exact values."""
    rows = A.row_indices() + 1
    cols = A.col.astype(np.int64) + 1
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{A.n_rows} {A.n_cols} {A.nnz}\n")
        for r, c, v in zip(rows.tolist(), cols.tolist(), A.val.tolist()):
            fh.write(f"{r} {c} {v!r}\n")


def spmv_range(A: CsrMatrix, x_in, y_out, row_s: int, row_e: int) -> None:
    """y_out[r] = sum_j A[r, j] x_in[j] for r in [row_s, row_e)."""
    kernels.spmv(A.row_ptr, A.col, A.val, x_in, y_out, row_s, row_e)


def spmv(A: CsrMatrix, x) -> np.ndarray:
    y = np.empty(A.n_rows)
    spmv_range(A, np.ascontiguousarray(x, dtype=np.float64), y, 0, A.n_rows)
    return y


def _select(A: CsrMatrix, mask: np.ndarray) -> CsrMatrix:
    rows = A.row_indices()[mask]
    row_ptr = np.zeros(A.n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=A.n_rows), out=row_ptr[1:])
    return CsrMatrix(A.n_rows, A.n_cols, row_ptr.astype(INDEX_DTYPE),
                     A.col[mask].copy(), A.val[mask].copy())


def split_ldu(A: CsrMatrix) -> LduSplit:
    if A.n_rows != A.n_cols:
        raise ValueError("split_ldu needs a square matrix")
    rows = A.row_indices()
    cols = A.col.astype(np.int64)
    stored = np.zeros(A.n_rows, dtype=bool)
    stored[rows[rows == cols]] = True
    return LduSplit(_select(A, cols < rows), A.diagonal(), _select(A, cols > rows), stored)


def check_permutation(perm, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError("perm is not a bijection on [0, n)")
    return perm


def inverse_permutation(perm) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def permute(A: CsrMatrix, perm) -> CsrMatrix:
    """Symmetric permutation: ``result[perm[i], perm[j]] = A[i, j]``."""
    if A.n_rows != A.n_cols:
        raise ValueError("permute needs a square matrix")
    perm = check_permutation(perm, A.n_rows)
    return csr_from_arrays(perm[A.row_indices()], perm[A.col.astype(np.int64)], A.val,
                           A.n_rows, A.n_cols)


def gen_poisson(dims) -> CsrMatrix:
    """Finite-difference Laplacian on a 1/2/3-D grid with Dirichlet truncation.

    The first grid dimension varies fastest in the row numbering.
    """
    dims = tuple(int(d) for d in np.atleast_1d(dims))
    if not 1 <= len(dims) <= 3 or min(dims) < 1:
        raise ValueError("dims must be 1 to 3 positive extents")
    n = int(np.prod(dims))
    idx = np.arange(n).reshape(dims[::-1])  # C order: last axis is dims[0]
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [np.full(n, 2.0 * len(dims))]
    for axis in range(idx.ndim):
        lo = [slice(None)] * idx.ndim
        hi = [slice(None)] * idx.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a, b = idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()
        rows += [a, b]
        cols += [b, a]
        vals += [np.full(a.size, -1.0), np.full(a.size, -1.0)]
    return csr_from_arrays(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n, n)


def gen_random(n: int, per_row: int = 5, seed: int = 0, symmetric: bool = False) -> CsrMatrix:
    """Random sparse matrix with about ``per_row`` nonzeros per row.

    Every row stores its diagonal; the diagonal dominates the off-diagonal
    row sum so the matrix is nonsingular.  ``symmetric=True`` mirrors the
    pattern and values.
    """
    rng = np.random.default_rng(seed)
    k = max(per_row - 1, 0)
    rows = np.repeat(np.arange(n), k)
    cols = rng.integers(0, n, size=n * k)
    vals = rng.uniform(-1.0, 1.0, size=n * k)
    keep = rows != cols
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    if symmetric:
        rows, cols, vals = np.concatenate([rows, cols]), np.concatenate([cols, rows]), np.concatenate([vals, vals])
    offsum = np.bincount(rows, weights=np.abs(vals), minlength=n)
    diag = offsum + 1.0 + rng.uniform(0.0, 1.0, size=n)
    return csr_from_arrays(np.concatenate([rows, np.arange(n)]), np.concatenate([cols, np.arange(n)]),
                           np.concatenate([vals, diag]), n, n)


def parse_matrix_spec(spec: str) -> CsrMatrix:
    """Load a matrix from a file path or a generator spec.

    Generator specs: ``poisson1d:N``, ``poisson2d:NX,NY``, ``poisson3d:NX,NY,NZ``,
    ``random:N,PER_ROW[,SEED]``, ``randsym:N,PER_ROW[,SEED]``.
    """
    name, sep, args = spec.partition(":")
    gens = {"poisson1d": 1, "poisson2d": 2, "poisson3d": 3}
    if sep and name in gens:
        dims = [int(a) for a in args.split(",")]
        if len(dims) != gens[name]:
            raise ValueError(f"{name} needs {gens[name]} extents, got {args!r}")
        return gen_poisson(dims)
    if sep and name in ("random", "randsym"):
        parts = [int(a) for a in args.split(",")]
        if not 1 <= len(parts) <= 3:
            raise ValueError(f"bad random spec {spec!r}")
        n, per_row, seed = (parts + [5, 0][len(parts) - 1:])[:3]
        return gen_random(n, per_row, seed, symmetric=(name == "randsym"))
    return read_matrix_market(spec, require_square=True)
