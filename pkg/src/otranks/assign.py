"""Exact dense linear assignment.

Shortest-augmenting-path solver (Jonker-Volgenant style) with O(n^3)
worst case. Exactness matters here: the distribution-freeness of the
rank-based statistics presumes the true cost minimizer, so approximate
or greedy matching is out of scope. The solver is deterministic: rows
are processed in increasing index order and column ties are broken by
the lowest column index, so identical inputs always produce identical
permutations. Comparisons inside the algorithm are exact float
comparisons; only the optimality-certificate check uses a tolerance.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist

from .errors import DataError, ShapeError, SizeGuardError, ValidationError

_BRUTE_FORCE_MAX = 10


@dataclass(frozen=True)
class CostMatrix:
    """A validated square matrix of finite, nonnegative costs."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_array(cls, entries) -> "CostMatrix":
        arr = np.ascontiguousarray(entries, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeError(f"cost matrix must be square, got shape {arr.shape}")
        if arr.size == 0:
            raise ShapeError("cost matrix must be nonempty")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("cost matrix contains non-finite entries")
        if (arr < 0).any():
            raise ValidationError("cost matrix contains negative entries")
        return cls(entries=arr)


@dataclass(frozen=True)
class Assignment:
    """An optimal row-to-column matching with its dual certificate.

    ``perm[i]`` is the (0-based) column assigned to row i and is always a
    bijection on {0, ..., n-1}. ``row_potentials`` / ``col_potentials``
    satisfy u[i] + v[j] <= cost[i, j] with equality on the chosen cells,
    which certifies optimality. The brute-force oracle does not produce
    potentials and leaves both as None.
    """

    perm: np.ndarray
    total_cost: float
    row_potentials: np.ndarray | None = None
    col_potentials: np.ndarray | None = None


def build_cost(data, grid) -> CostMatrix:
    """Squared-Euclidean cost matrix between observations and grid points.

    Entry (i, j) is the squared distance between observation i and grid
    point j. Counts and dimensions must agree.
    """
    rows = np.asarray(getattr(data, "rows", data), dtype=np.float64)
    pts = np.asarray(getattr(grid, "points", grid), dtype=np.float64)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    if rows.shape[0] != pts.shape[0]:
        raise ShapeError(
            f"data has {rows.shape[0]} observations but grid has {pts.shape[0]} points"
        )
    if rows.shape[1] != pts.shape[1]:
        raise ShapeError(
            f"data dimension {rows.shape[1]} != grid dimension {pts.shape[1]}"
        )
    if not np.all(np.isfinite(rows)):
        raise DataError("data contains non-finite coordinates")
    return CostMatrix(entries=cdist(rows, pts, "sqeuclidean"))


@njit(cache=True)
def _augmenting_path_core(cost):  # pragma: no cover - exercised via solve()
    """Hungarian algorithm with potentials, 1-based with a virtual column 0.

    Returns (perm, u, v): the optimal column for each row and the final
    dual potentials.
    """
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.intp)  # match[j] = row matched to col j
    way = np.zeros(n + 1, dtype=np.intp)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = inf
            used[j] = False
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = -1
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    perm = np.empty(n, dtype=np.intp)
    for j in range(1, n + 1):
        perm[match[j] - 1] = j - 1
    return perm, u[1:], v[1:]


def solve(cost: CostMatrix) -> Assignment:
    """Exact minimum-cost assignment for a dense cost matrix."""
    if not isinstance(cost, CostMatrix):
        cost = CostMatrix.from_array(cost)
    entries = cost.entries
    perm, u, v = _augmenting_path_core(entries)
    n = cost.n
    assert np.array_equal(np.sort(perm), np.arange(n)), "perm must be a bijection"
    total = float(entries[np.arange(n), perm].sum())
    return Assignment(
        perm=perm, total_cost=total, row_potentials=u, col_potentials=v
    )


@functools.lru_cache(maxsize=None)
def _all_permutations(n: int) -> np.ndarray:
    # cached only up to n=8 (n! x n stays a few MB); larger n stream in chunks
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def _permutation_chunks(n: int, chunk: int = 200_000):
    if n <= 8:
        yield _all_permutations(n)
        return
    it = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def brute_force(cost: CostMatrix) -> Assignment:
    """Exhaustive-enumeration oracle; ties go to the lexicographically
    smallest permutation. Guarded to n <= 10.

    Permutations are enumerated in lexicographic order and evaluated in
    vectorised blocks; the first block index attaining the running
    minimum preserves the lexicographic tie-break.
    """
    if not isinstance(cost, CostMatrix):
        cost = CostMatrix.from_array(cost)
    n = cost.n
    if n > _BRUTE_FORCE_MAX:
        raise SizeGuardError(
            f"brute_force enumerates n! permutations and is capped at n={_BRUTE_FORCE_MAX}"
        )
    entries = cost.entries
    idx = np.arange(n)
    best_cost = np.inf
    best_perm = None
    for perms in _permutation_chunks(n):
        totals = entries[idx, perms].sum(axis=1)
        k = int(np.argmin(totals))
        if totals[k] < best_cost:
            best_cost = float(totals[k])
            best_perm = perms[k].copy()
    return Assignment(perm=best_perm, total_cost=best_cost)
