"""Statistic kernels on rank point clouds.

``dcov_sq`` is the squared (V-statistic) distance covariance of two
equally-sized clouds, computed through the double-centered pairwise
distance matrices: with a and b the distance matrices and A, B their
double centerings, the average of A*B equals

    S1 + S2 - 2*S3

where S1 is the mean of a*b, S2 the product of the two grand means and
S3 the mean over k of the product of row means. The centered form is
algebraically identical to the three-sum definition and costs O(n^2 d).

``energy_sq`` is the two-sample (V-statistic) energy distance,
2*cross - within_x - within_y, in O(mn d).

``hoeffding_integral`` and ``cvm_integral`` are the two closed-form
one-dimensional functionals used as independent numerical oracles: for
tie-free univariate data with lattice grids, dcov_sq on the ranks equals
4x the first and energy_sq on pooled rank slices equals 2x the second.
Empirical distribution functions use the weak inequality convention.

Both statistic kernels are provably nonnegative, so values below
-1e-12 raise an internal-consistency error and values in [-1e-12, 0)
are reported as 0.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InternalConsistencyError, ShapeError

_NEG_TOL = 1e-12


def _clamp_nonnegative(value: float, what: str) -> float:
    if value < -_NEG_TOL:
        raise InternalConsistencyError(
            f"{what} evaluated to {value}, below the provable lower bound of 0"
        )
    return 0.0 if value < 0.0 else value


def _as_cloud(a) -> np.ndarray:
    arr = np.asarray(getattr(a, "rows", a), dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def _centered_distances(a: np.ndarray) -> np.ndarray:
    d = cdist(a, a)
    return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()


def dcov_sq(rx, ry) -> float:
    """Squared distance covariance between two aligned point clouds.

    Row k of ``rx`` and row k of ``ry`` belong to the same observation;
    the clouds may have different dimensions but must have equal counts.
    """
    rx = _as_cloud(rx)
    ry = _as_cloud(ry)
    if rx.shape[0] != ry.shape[0]:
        raise ShapeError(
            f"dcov_sq needs equal counts, got {rx.shape[0]} and {ry.shape[0]}"
        )
    n = rx.shape[0]
    if n == 1:
        return 0.0
    value = float(np.vdot(_centered_distances(rx), _centered_distances(ry))) / (n * n)
    return _clamp_nonnegative(value, "dcov_sq")


def energy_sq(rx, ry) -> float:
    """Two-sample energy distance between point clouds of a shared dimension."""
    rx = _as_cloud(rx)
    ry = _as_cloud(ry)
    if rx.shape[1] != ry.shape[1]:
        raise ShapeError(
            f"energy_sq needs a shared dimension, got {rx.shape[1]} and {ry.shape[1]}"
        )
    cross = cdist(rx, ry).mean()
    within_x = cdist(rx, rx).mean()
    within_y = cdist(ry, ry).mean()
    return _clamp_nonnegative(float(2.0 * cross - within_x - within_y), "energy_sq")


def hoeffding_integral(x, y) -> float:
    """Mean squared gap between the joint empirical CDF and the product of
    the marginal empirical CDFs, evaluated on the product grid of the data.

    Computes (1/n^2) * sum_{i,j} (F_n(x_i, y_j) - F_n^x(x_i) F_n^y(y_j))^2
    with all CDFs using the <= convention.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"hoeffding_integral needs equal counts, got {x.size} and {y.size}")
    n = x.size
    ix = (x[:, None] <= x[None, :]).astype(np.float64)  # ix[k, i] = 1{x_k <= x_i}
    iy = (y[:, None] <= y[None, :]).astype(np.float64)
    f_joint = (ix.T @ iy) / n  # f_joint[i, j] = (1/n) #{k : x_k <= x_i, y_k <= y_j}
    fx = ix.mean(axis=0)
    fy = iy.mean(axis=0)
    gap = f_joint - np.outer(fx, fy)
    return float((gap * gap).mean())


def cvm_integral(x, y) -> float:
    """Two-sample Cramer-von Mises functional on the pooled sample.

    Averages (F_m^x(t) - G_n^y(t))^2 over the pooled order statistics t,
    with <=-convention CDFs.
    """
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    y = np.sort(np.asarray(y, dtype=np.float64).ravel())
    if x.size == 0 or y.size == 0:
        raise ShapeError("cvm_integral needs nonempty samples")
    pooled = np.sort(np.concatenate([x, y]))
    fx = np.searchsorted(x, pooled, side="right") / x.size
    gy = np.searchsorted(y, pooled, side="right") / y.size
    return float(((fx - gy) ** 2).mean())
