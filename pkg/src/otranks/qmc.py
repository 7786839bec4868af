"""Fixed reference grids on the unit cube.

The tests in this package replace the data by their optimal assignment to
a fixed set of n points in [0, 1]^d. For d >= 2 that set is a standard
Halton sequence (index starting at 1; coordinate j uses the j-th prime as
base). For d = 1 it is the equispaced lattice {1/n, ..., n/n}. A
user-supplied point set can be used instead after validation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import UsageError, ValidationError

# First 64 primes; caps the supported dimension at 64.
_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199,
    211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281,
    283, 293, 307, 311,
)

MAX_DIM = len(_PRIMES)

HALTON = "halton"
LATTICE1D = "lattice1d"
CUSTOM = "custom"


@dataclass(frozen=True)
class RankGrid:
    """An ordered set of n distinct points in [0, 1]^d.

    Attributes
    ----------
    points : ndarray of shape (n, d)
        Grid coordinates, 64-bit floats in [0, 1].
    kind : str
        One of ``"halton"``, ``"lattice1d"``, ``"custom"``.
    """

    points: np.ndarray
    kind: str

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def descriptor(self) -> str:
        """Stable string identifying this grid for cache keys and metadata.

        Built-in kinds are identified by name alone (they are fully
        determined by n and d); custom grids carry a content hash.
        """
        if self.kind == CUSTOM:
            digest = hashlib.sha256(self.points.tobytes()).hexdigest()[:12]
            return f"custom:{digest}"
        return self.kind


def _is_prime(m: int) -> bool:
    if m < 2:
        return False
    f = 2
    while f * f <= m:
        if m % f == 0:
            return False
        f += 1
    return True


def radical_inverse(k: int, base: int) -> float:
    """Base-`base` digit-reversed fraction of the positive integer k.

    The digits of k in the given base are mirrored around the radix
    point: k = (d_m ... d_1 d_0)_base maps to (0.d_0 d_1 ... d_m)_base.
    Digits are extracted with integer arithmetic and combined with a
    single Horner pass so the only rounding is in the final divisions.
    """
    if k < 1:
        raise UsageError(f"radical inverse index must be >= 1, got {k}")
    if not _is_prime(base):
        raise UsageError(f"radical inverse base must be prime, got {base}")
    digits = []
    while k > 0:
        digits.append(k % base)
        k //= base
    r = 0.0
    for d in reversed(digits):
        r = (r + d) / base
    return r


def _radical_inverse_block(count: int, base: int) -> np.ndarray:
    """radical_inverse(k, base) for k = 1..count, vectorised.

    Performs the same digit extraction and Horner evaluation as the
    scalar routine (leading zero digits contribute exact zeros), so the
    results are bitwise identical to n scalar calls.
    """
    ks = np.arange(1, count + 1, dtype=np.int64)
    ndigits = 1
    while base**ndigits <= count:
        ndigits += 1
    digits = np.empty((count, ndigits), dtype=np.int64)
    rem = ks.copy()
    for c in range(ndigits):
        digits[:, c] = rem % base
        rem //= base
    r = np.zeros(count)
    for c in range(ndigits - 1, -1, -1):
        r = (r + digits[:, c]) / base
    return r


def halton_grid(n: int, d: int) -> RankGrid:
    """Halton sequence of n points in d dimensions, indices 1..n.

    Coordinate j uses the j-th prime as its base (2, 3, 5, ...). The
    sequence is a prefix-stable, deterministic low-discrepancy set whose
    empirical measure approximates the uniform law on [0, 1]^d.
    """
    if n < 1 or d < 1:
        raise UsageError(f"halton grid needs n >= 1 and d >= 1, got n={n}, d={d}")
    if d > MAX_DIM:
        raise UsageError(
            f"halton grid supports at most d={MAX_DIM} (prime table size), got d={d}"
        )
    pts = np.empty((n, d))
    for j in range(d):
        pts[:, j] = _radical_inverse_block(n, _PRIMES[j])
    pts.setflags(write=False)
    return RankGrid(points=pts, kind=HALTON)


def lattice1d(n: int) -> RankGrid:
    """The one-dimensional grid {1/n, 2/n, ..., n/n}."""
    if n < 1:
        raise UsageError(f"lattice grid needs n >= 1, got n={n}")
    pts = (np.arange(1, n + 1, dtype=np.float64) / n).reshape(n, 1)
    pts.setflags(write=False)
    return RankGrid(points=pts, kind=LATTICE1D)


def validate_custom(points) -> RankGrid:
    """Wrap a user-supplied point set after checking the grid invariants.

    Every coordinate must lie in [0, 1] and all points must be pairwise
    distinct. Violations name the offending point index.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.size == 0:
        raise ValidationError("custom grid must be a nonempty rectangular point list")
    if not np.all(np.isfinite(pts)):
        bad = int(np.argwhere(~np.isfinite(pts).all(axis=1))[0, 0])
        raise ValidationError(f"custom grid point {bad} has a non-finite coordinate")
    inside = (pts >= 0.0) & (pts <= 1.0)
    if not inside.all():
        bad = int(np.argwhere(~inside.all(axis=1))[0, 0])
        raise ValidationError(f"custom grid point {bad} has a coordinate outside [0, 1]")
    _, first, counts = np.unique(
        pts, axis=0, return_index=True, return_counts=True
    )
    if (counts > 1).any():
        dup_rows = np.ones(len(pts), dtype=bool)
        dup_rows[first] = False
        # report the first repeated occurrence
        bad = int(np.flatnonzero(dup_rows)[0]) if dup_rows.any() else int(
            first[np.argmax(counts > 1)]
        )
        raise ValidationError(f"custom grid point {bad} duplicates an earlier point")
    pts = pts.copy()
    pts.setflags(write=False)
    return RankGrid(points=pts, kind=CUSTOM)


def default_grid(n: int, d: int) -> RankGrid:
    """Halton grid for d >= 2, the 1-d lattice for d = 1."""
    return lattice1d(n) if d == 1 else halton_grid(n, d)


def save_grid_csv(grid: RankGrid, path) -> None:
    """Write the grid as CSV, one point per row, no header.

    Coordinates use shortest round-trip decimal form, so a reload is
    value-exact.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for row in grid.points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_grid_csv(path) -> RankGrid:
    """Read a grid written by :func:`save_grid_csv`; validates invariants."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(f) for f in line.split(",")])
    return validate_custom(rows)
