"""Empirical multivariate rank maps.

A rank map sends the n observations onto a fixed n-point grid via the
permutation minimizing the total squared Euclidean distance. Variants:

* :func:`empirical_ranks` ranks one sample against one grid (used
  marginally for independence testing),
* :func:`pooled_ranks` ranks the concatenation of several samples
  against one grid and re-splits the result (K-sample testing),
* :func:`paired_symmetry_ranks` matches the unordered pairs {X_i, -X_i}
  to the half-pairs of a 2d-dimensional grid and orients each match by a
  two-point transport (symmetry testing),
* :func:`coordinatewise_prerank` optionally replaces each column by its
  classical one-dimensional ranks first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import assign, qmc
from .errors import DataError, ShapeError


@dataclass(frozen=True)
class PointCloud:
    """n observations in d-dimensional real space."""

    rows: np.ndarray

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_rows(cls, rows) -> "PointCloud":
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise DataError(f"point cloud must be a nonempty 2-d array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("point cloud contains non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        return cls(rows=arr)


@dataclass(frozen=True)
class RankMap:
    """The rank assignment of one sample to one grid.

    ``ranks[i]`` is the grid point assigned to observation i, i.e.
    ``grid.points[perm[i]]``; the rows of ``ranks`` are exactly a
    permutation of the grid.
    """

    grid: qmc.RankGrid
    perm: np.ndarray
    ranks: np.ndarray
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PooledRanks:
    """A pooled rank map re-split into per-sample slices."""

    map: RankMap
    slices: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class SymmetryRanks:
    """Aligned rank lists for the symmetry test.

    ``x_ranks[i]`` and ``neg_x_ranks[i]`` are the d-dimensional halves of
    one 2d-dimensional grid point, attributed to X_i and -X_i by the
    per-pair two-point transport.
    """

    pair_grid: qmc.RankGrid
    x_ranks: np.ndarray
    neg_x_ranks: np.ndarray
    warnings: tuple[str, ...] = ()


def _duplicate_row_warnings(rows: np.ndarray) -> tuple[str, ...]:
    _, counts = np.unique(rows, axis=0, return_counts=True)
    dups = int((counts > 1).sum())
    if dups:
        return (f"data contains {dups} duplicated row value(s); ties make the rank map tie-break dependent",)
    return ()


def empirical_ranks(data: PointCloud, grid: qmc.RankGrid) -> RankMap:
    """Optimal-assignment rank map of one sample onto one grid.

    Solves the n x n assignment problem on the squared-distance cost
    matrix and materializes the assigned grid point for every
    observation. Duplicate data rows are reported in the result warnings
    but are not perturbed.
    """
    if data.n != grid.n:
        raise ShapeError(f"data has n={data.n} but grid has n={grid.n}")
    if data.d != grid.d:
        raise ShapeError(f"data has d={data.d} but grid has d={grid.d}")
    cost = assign.build_cost(data, grid)
    sol = assign.solve(cost)
    ranks = grid.points[sol.perm]
    ranks.setflags(write=False)
    return RankMap(
        grid=grid,
        perm=sol.perm,
        ranks=ranks,
        warnings=_duplicate_row_warnings(data.rows),
    )


def pooled_ranks(samples, grid: qmc.RankGrid) -> PooledRanks:
    """Rank map of the concatenated samples, re-split per sample.

    Samples are concatenated in the given order; the rank slices are
    returned in the same order.
    """
    samples = list(samples)
    if not samples:
        raise ShapeError("pooled_ranks needs at least one sample")
    d = samples[0].d
    for k, s in enumerate(samples):
        if s.d != d:
            raise ShapeError(f"sample {k} has d={s.d}, expected d={d}")
    counts = [s.n for s in samples]
    if sum(counts) != grid.n:
        raise ShapeError(
            f"samples hold {sum(counts)} observations but grid has n={grid.n}"
        )
    pooled = PointCloud.from_rows(np.vstack([s.rows for s in samples]))
    rmap = empirical_ranks(pooled, grid)
    edges = np.cumsum([0] + counts)
    slices = tuple(
        rmap.ranks[edges[k] : edges[k + 1]] for k in range(len(samples))
    )
    return PooledRanks(map=rmap, slices=slices)


def paired_symmetry_ranks(data: PointCloud) -> SymmetryRanks:
    """Two-stage rank construction for the symmetry test.

    Stage one matches the n unordered pairs {X_i, -X_i} to the n grid
    pairs (the first-d and last-d halves of a Halton grid in 2d
    dimensions), using for each (i, j) the cost of the optimal two-point
    transport between {X_i, -X_i} and the two halves of grid point j.
    Stage two orients each matched pair: X_i takes whichever half gives
    the cheaper pairing, ties keeping the unswapped (first-half) pairing.

    The pair cost must be invariant under X_i -> -X_i: that is what
    makes, under a centrally symmetric law, the matched-pair permutation
    uniform and the n orientations independent fair coins, so the
    configuration is uniform over all 2^n n! possibilities regardless of
    the data law. (Matching the ordered vectors (X_i, -X_i) instead
    would couple the permutation to the orientations and destroy both
    uniformity and, for d >= 2, distribution-freeness.)
    """
    n, d = data.n, data.d
    grid = qmc.halton_grid(n, 2 * d)
    first_g = grid.points[:, :d]
    last_g = grid.points[:, d:]
    x = data.rows
    # pairing costs: keep = ||x-a||^2 + ||-x-b||^2, swap with a, b exchanged
    keep = (
        ((x[:, None, :] - first_g[None, :, :]) ** 2).sum(axis=2)
        + ((-x[:, None, :] - last_g[None, :, :]) ** 2).sum(axis=2)
    )
    swap = (
        ((x[:, None, :] - last_g[None, :, :]) ** 2).sum(axis=2)
        + ((-x[:, None, :] - first_g[None, :, :]) ** 2).sum(axis=2)
    )
    sol = assign.solve(assign.CostMatrix.from_array(np.minimum(keep, swap)))
    pair_of_obs = sol.perm
    swap_chosen = swap[np.arange(n), pair_of_obs] < keep[np.arange(n), pair_of_obs]
    a = first_g[pair_of_obs]
    b = last_g[pair_of_obs]
    x_ranks = np.where(swap_chosen[:, None], b, a)
    neg_x_ranks = np.where(swap_chosen[:, None], a, b)
    x_ranks.setflags(write=False)
    neg_x_ranks.setflags(write=False)
    return SymmetryRanks(
        pair_grid=grid,
        x_ranks=x_ranks,
        neg_x_ranks=neg_x_ranks,
        warnings=_duplicate_row_warnings(data.rows),
    )


def coordinatewise_prerank(data: PointCloud) -> tuple[PointCloud, tuple[str, ...]]:
    """Replace every column by classical 1-d ranks scaled to {1/n, ..., 1}.

    Ties within a column share the average rank; each tied column adds a
    warning record. Idempotent on tie-free rank-valued data.
    """
    n = data.n
    cols = []
    warnings = []
    for j in range(data.d):
        col = data.rows[:, j]
        r = rankdata(col, method="average") / n
        if np.unique(col).size < n:
            warnings.append(f"column {j} has ties; averaged ranks used")
        cols.append(r)
    return PointCloud.from_rows(np.column_stack(cols)), tuple(warnings)
