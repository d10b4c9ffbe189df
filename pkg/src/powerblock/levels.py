"""BFS level structures and cache-sized level grouping."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.sparse import csgraph

from .sparse import CsrMatrix, csr_from_arrays, inverse_permutation, permute

DEFAULT_CACHE_MB = 85.0


@dataclass(frozen=True, eq=False)
class LevelStructure:
    """Breadth-first levels of the symmetrized matrix graph.

    ``perm`` maps original row index to its position in level order and
    ``inv_perm`` is its inverse; ``level_ptr`` delimits the levels in the
    permuted row space.
    """

    n_levels: int
    level_ptr: np.ndarray
    perm: np.ndarray
    inv_perm: np.ndarray
    n_components: int = 1

    @property
    def n_rows(self) -> int:
        return int(self.level_ptr[-1])

    def level_sizes(self) -> np.ndarray:
        return np.diff(self.level_ptr)

    def level_of_permuted_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_levels), self.level_sizes())

    def level_of(self) -> np.ndarray:
        """Level of every row in the original numbering."""
        return self.level_of_permuted_rows()[self.perm]

    @classmethod
    def from_assignment(cls, level_of, n_components: int = 1) -> "LevelStructure":
        """Build a structure from an explicit level per original row.

        Rows are ordered by (level, original index); levels must be
        numbered 0..n_levels-1 without gaps.
        """
        level_of = np.asarray(level_of, dtype=np.int64)
        n = level_of.size
        counts = np.bincount(level_of) if n else np.zeros(0, dtype=np.int64)
        if np.any(counts == 0):
            raise ValueError("level numbers must be contiguous from 0")
        inv_perm = np.lexsort((np.arange(n), level_of))
        level_ptr = np.zeros(counts.size + 1, dtype=np.int64)
        np.cumsum(counts, out=level_ptr[1:])
        return cls(int(counts.size), level_ptr, inverse_permutation(inv_perm), inv_perm,
                   int(n_components))


def symmetrized_pattern(A: CsrMatrix) -> CsrMatrix:
    """Pattern of A + A^T without the diagonal (unit values)."""
    rows = A.row_indices()
    cols = A.col.astype(np.int64)
    off = rows != cols
    r = np.concatenate([rows[off], cols[off]])
    c = np.concatenate([cols[off], rows[off]])
    G = csr_from_arrays(r, c, np.ones(r.size), A.n_rows, A.n_cols)
    return CsrMatrix(G.n_rows, G.n_cols, G.row_ptr, G.col, np.ones(G.nnz))


def _bfs_levels(G: CsrMatrix, roots: np.ndarray) -> np.ndarray:
    n = G.n_rows
    level = np.full(n, -1, dtype=np.int64)
    level[roots] = 0
    ptr = G.row_ptr.astype(np.int64)
    col = G.col.astype(np.int64)
    frontier = np.asarray(roots, dtype=np.int64)
    depth = 0
    while frontier.size:
        starts = ptr[frontier]
        lens = ptr[frontier + 1] - starts
        total = int(lens.sum())
        if total == 0:
            break
        offs = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)
        nb = col[offs]
        nb = np.unique(nb[level[nb] < 0])
        depth += 1
        level[nb] = depth
        frontier = nb
    return level


def build_levels(A: CsrMatrix) -> LevelStructure:
    """BFS levels of the symmetrized graph of ``A``.

    Every connected component is rooted at its minimum-degree node (ties go
    to the smaller index) and all components are aligned at level 0.
    """
    if A.n_rows != A.n_cols:
        raise ValueError("build_levels needs a square matrix")
    n = A.n_rows
    if n == 0:
        return LevelStructure(0, np.zeros(1, dtype=np.int64), np.zeros(0, np.int64),
                              np.zeros(0, np.int64), 0)
    G = symmetrized_pattern(A)
    n_comp, labels = csgraph.connected_components(G.to_scipy(), directed=False)
    degree = G.row_lengths()
    order = np.lexsort((np.arange(n), degree, labels))
    first = np.ones(n, dtype=bool)
    first[1:] = labels[order][1:] != labels[order][:-1]
    roots = order[first]
    level = _bfs_levels(G, roots)
    return LevelStructure.from_assignment(level, n_components=int(n_comp))


def validate_levels(A_perm: CsrMatrix, levels: LevelStructure) -> bool:
    """True iff every nonzero of the permuted matrix joins equal or adjacent levels."""
    lvl = levels.level_of_permuted_rows()
    rows = A_perm.row_indices()
    return bool(np.all(np.abs(lvl[rows] - lvl[A_perm.col.astype(np.int64)]) <= 1))


class Group(NamedTuple):
    level_start: int
    level_end: int
    row_start: int
    row_end: int
    footprint_bytes: int


@dataclass(eq=False)
class ExecutionPlan:
    """Contiguous level groups of a level-ordered matrix.

    ``group_row_ptr`` delimits groups in the permuted row space.  ``p_opt``
    is filled in by the tuner when one has been run.
    """

    group_level_ptr: np.ndarray
    group_row_ptr: np.ndarray
    group_bytes: np.ndarray
    cache_bytes: float
    p_m: int
    sub_powers: int = 1
    p_opt: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_groups(self) -> int:
        return len(self.group_row_ptr) - 1

    @property
    def n_rows(self) -> int:
        return int(self.group_row_ptr[-1])

    @property
    def groups(self) -> list[Group]:
        return [
            Group(int(self.group_level_ptr[g]), int(self.group_level_ptr[g + 1]),
                  int(self.group_row_ptr[g]), int(self.group_row_ptr[g + 1]),
                  int(self.group_bytes[g]))
            for g in range(self.n_groups)
        ]

    @classmethod
    def single_group(cls, n_rows: int, p_m: int = 1) -> "ExecutionPlan":
        return cls(np.array([0, 1]), np.array([0, n_rows]), np.array([0]), float("inf"), p_m)

    @classmethod
    def from_row_bounds(cls, row_bounds, p_m: int = 1) -> "ExecutionPlan":
        """Plan with explicit group row boundaries (one level per group)."""
        rb = np.asarray(row_bounds, dtype=np.int64)
        k = rb.size - 1
        return cls(np.arange(k + 1), rb, np.zeros(k, dtype=np.int64), float("nan"), p_m)


def level_footprints(levels: LevelStructure, A: CsrMatrix, p_m: int) -> np.ndarray:
    """Bytes per level: 12 per nonzero + 4 per row pointer + vector-block slices."""
    lens = A.row_lengths()[levels.inv_perm]
    row_bytes = 12 * lens + 4 + 8 * (p_m + 1)
    csum = np.concatenate([[0], np.cumsum(row_bytes)])
    return csum[levels.level_ptr[1:]] - csum[levels.level_ptr[:-1]]


def greedy_groups(level_bytes, target: float) -> list[tuple[int, int]]:
    """Greedily pack consecutive levels into groups of at most ``target`` bytes."""
    groups = []
    start, acc = 0, 0
    for i, b in enumerate(np.asarray(level_bytes).tolist()):
        if i > start and acc + b > target:
            groups.append((start, i))
            start, acc = i, 0
        acc += b
    if len(level_bytes):
        groups.append((start, len(level_bytes)))
    return groups


def group_levels(levels: LevelStructure, A: CsrMatrix, cache_bytes: float, p_m: int) -> ExecutionPlan:
    """Group levels so each group's footprint fits ``cache_bytes / (p_m + 1)``.

    ``A`` is the matrix in its original numbering (the one ``levels`` was
    built from).
    """
    if cache_bytes <= 0 or p_m < 1:
        raise ValueError("cache_bytes must be positive and p_m >= 1")
    fp = level_footprints(levels, A, p_m)
    spans = greedy_groups(fp, cache_bytes / (p_m + 1))
    lp = np.array([s for s, _ in spans] + [levels.n_levels], dtype=np.int64)
    if not spans:
        lp = np.zeros(1, dtype=np.int64)
    csum = np.concatenate([[0], np.cumsum(fp)])
    return ExecutionPlan(
        group_level_ptr=lp,
        group_row_ptr=levels.level_ptr[lp],
        group_bytes=csum[lp[1:]] - csum[lp[:-1]],
        cache_bytes=float(cache_bytes),
        p_m=int(p_m),
    )


class Blocking(NamedTuple):
    """A matrix permuted to level order together with its levels and plan."""

    A_perm: CsrMatrix
    levels: LevelStructure
    plan: ExecutionPlan

    def to_perm(self, x) -> np.ndarray:
        """Reorder a vector from original to level numbering."""
        return np.ascontiguousarray(np.asarray(x, dtype=np.float64)[self.levels.inv_perm])

    def from_perm(self, y) -> np.ndarray:
        return np.asarray(y)[..., self.levels.perm]


def prepare_blocking(A: CsrMatrix, cache_bytes: float, p_m: int) -> Blocking:
    levels = build_levels(A)
    return Blocking(permute(A, levels.perm), levels, group_levels(levels, A, cache_bytes, p_m))


def level_summary(levels: LevelStructure, plan: ExecutionPlan | None = None) -> dict:
    sizes = levels.level_sizes()
    out = {
        "n_rows": levels.n_rows,
        "n_levels": levels.n_levels,
        "n_components": levels.n_components,
        "level_sizes": {
            "min": int(sizes.min()) if sizes.size else 0,
            "max": int(sizes.max()) if sizes.size else 0,
            "mean": float(sizes.mean()) if sizes.size else 0.0,
        },
        "level_size_histogram": {str(k): int(v) for k, v in zip(*np.unique(sizes, return_counts=True))},
    }
    if plan is not None:
        gb = plan.group_bytes
        out.update({
            "cache_bytes": plan.cache_bytes,
            "p_m": plan.p_m,
            "n_groups": plan.n_groups,
            "group_footprint_bytes": {
                "target": plan.cache_bytes / (plan.p_m + 1),
                "min": int(gb.min()) if gb.size else 0,
                "max": int(gb.max()) if gb.size else 0,
                "mean": float(gb.mean()) if gb.size else 0.0,
            },
        })
    return out
