"""Monte Carlo null tables for the scaled statistics.

Under the null, the rank vectors are uniform over permutations of the
fixed grid(s), so the null law of every scaled statistic can be sampled
by permuting grid points, never the data. Tables therefore depend only
on (n or counts, dimensions, grid, B, seed) and can be generated before
any data exist, cached, and reused.

Replicate b draws its permutations from an independent RNG stream
derived from (seed, b), so tables are reproducible bit for bit and the
replicate order is immaterial.

The stream generator is numpy's PCG64 seeded through SeedSequence;
permutations come from ``Generator.permutation`` (a Fisher-Yates
shuffle) and coin flips from ``Generator.random``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import qmc
from .errors import MetadataError, ParseError, ShapeError, UsageError

FORMAT_VERSION = "1"
RNG_NAME = "pcg64"

MODE_RDCOV = "rdcov"
MODE_ENERGY = "energy"
MODE_K_INDEP = "k_indep"
MODE_K_SAMPLE = "k_sample"
MODE_SYMMETRY = "symmetry"

_MODES = (MODE_RDCOV, MODE_ENERGY, MODE_K_INDEP, MODE_K_SAMPLE, MODE_SYMMETRY)

DEFAULT_B = 10_000
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class NullTable:
    """B sorted draws of a scaled null statistic plus provenance metadata."""

    samples: np.ndarray
    mode: str
    meta: dict

    @property
    def b(self) -> int:
        return self.samples.size


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    """Independent RNG stream for replicate b of a run seeded with `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, b])))


def _finish(values: np.ndarray, mode: str, meta: dict) -> NullTable:
    samples = np.sort(np.maximum(values, 0.0))
    samples.setflags(write=False)
    return NullTable(samples=samples, mode=mode, meta=meta)


def _base_meta(mode: str, b: int, seed: int) -> dict:
    return {
        "format-version": FORMAT_VERSION,
        "mode": mode,
        "rng": RNG_NAME,
        "b": str(int(b)),
        "seed": str(int(seed)),
    }


def _check_b(b: int) -> None:
    if b < 1:
        raise UsageError(f"B must be >= 1, got {b}")


def null_sample_rdcov(
    n: int, grid1: qmc.RankGrid, grid2: qmc.RankGrid, b: int, seed: int
) -> NullTable:
    """Null table of n * dcov_sq under independence.

    One grid is held in its stored order while the other is permuted
    uniformly; holding one side fixed is an exact reduction because the
    statistic only depends on the relative pairing of the two rank
    vectors.
    """
    if grid1.n != n or grid2.n != n:
        raise ShapeError(
            f"grids must both have n={n}, got {grid1.n} and {grid2.n}"
        )
    _check_b(b)
    a1 = _centered(cdist(grid1.points, grid1.points))
    a2 = _centered(cdist(grid2.points, grid2.points))
    values = np.empty(b)
    for rep in range(b):
        rng = replicate_rng(seed, rep)
        pi = rng.permutation(n)
        values[rep] = n * np.vdot(a1, a2[np.ix_(pi, pi)]) / (n * n)
    meta = _base_meta(MODE_RDCOV, b, seed) | {
        "n": str(n),
        "d1": str(grid1.d),
        "d2": str(grid2.d),
        "grid1": grid1.descriptor(),
        "grid2": grid2.descriptor(),
    }
    return _finish(values, MODE_RDCOV, meta)


def null_sample_re(
    m: int, n: int, grid: qmc.RankGrid, b: int, seed: int
) -> NullTable:
    """Null table of (mn/(m+n)) * energy_sq under equality of distributions.

    Each replicate permutes the pooled grid uniformly, labels the first m
    points as the X pseudo-sample and the rest as Y.
    """
    if grid.n != m + n:
        raise ShapeError(f"grid must have m+n={m + n} points, got {grid.n}")
    _check_b(b)
    dist = cdist(grid.points, grid.points)
    scale = m * n / (m + n)
    values = np.empty(b)
    for rep in range(b):
        rng = replicate_rng(seed, rep)
        pi = rng.permutation(m + n)
        xi, yi = pi[:m], pi[m:]
        re2 = (
            2.0 * dist[np.ix_(xi, yi)].mean()
            - dist[np.ix_(xi, xi)].mean()
            - dist[np.ix_(yi, yi)].mean()
        )
        values[rep] = scale * re2
    meta = _base_meta(MODE_ENERGY, b, seed) | {
        "m": str(m),
        "n": str(n),
        "d": str(grid.d),
        "grid": grid.descriptor(),
    }
    return _finish(values, MODE_ENERGY, meta)


def null_sample_k_indep(n: int, grids, b: int, seed: int) -> NullTable:
    """Null table of n * sum_j dcov_sq(block j, blocks j+1..K) for mutual
    independence of K blocks.

    Each replicate permutes every grid independently; block j is compared
    against the row-wise concatenation of the permuted grids j+1..K.
    """
    grids = list(grids)
    if len(grids) < 2:
        raise UsageError("k-independence needs at least K=2 grids")
    for g in grids:
        if g.n != n:
            raise ShapeError(f"all grids must have n={n}, got {g.n}")
    _check_b(b)
    k = len(grids)
    pts = [g.points for g in grids]
    values = np.empty(b)
    for rep in range(b):
        rng = replicate_rng(seed, rep)
        permuted = [p[rng.permutation(n)] for p in pts]
        total = 0.0
        for j in range(k - 1):
            rest = np.hstack(permuted[j + 1 :])
            total += np.vdot(
                _centered(cdist(permuted[j], permuted[j])),
                _centered(cdist(rest, rest)),
            ) / (n * n)
        values[rep] = n * total
    meta = _base_meta(MODE_K_INDEP, b, seed) | {
        "n": str(n),
        "k": str(k),
        "dims": ",".join(str(g.d) for g in grids),
        "grids": ",".join(g.descriptor() for g in grids),
    }
    return _finish(values, MODE_K_INDEP, meta)


def null_sample_k_sample(counts, grid: qmc.RankGrid, b: int, seed: int) -> NullTable:
    """Null table of n * sum_j energy_sq(group j, group j+1) for K-sample
    equality, n the pooled count.

    One permutation of the pooled grid per replicate, split into K
    consecutive groups of the given sizes.
    """
    counts = tuple(int(c) for c in counts)
    if len(counts) < 2:
        raise UsageError("k-sample needs at least K=2 groups")
    if any(c < 1 for c in counts):
        raise UsageError(f"group counts must be positive, got {counts}")
    n = sum(counts)
    if grid.n != n:
        raise ShapeError(f"grid must have {n} points, got {grid.n}")
    _check_b(b)
    dist = cdist(grid.points, grid.points)
    edges = np.cumsum((0,) + counts)
    values = np.empty(b)
    for rep in range(b):
        rng = replicate_rng(seed, rep)
        pi = rng.permutation(n)
        groups = [pi[edges[j] : edges[j + 1]] for j in range(len(counts))]
        total = 0.0
        for j in range(len(counts) - 1):
            gj, gk = groups[j], groups[j + 1]
            total += (
                2.0 * dist[np.ix_(gj, gk)].mean()
                - dist[np.ix_(gj, gj)].mean()
                - dist[np.ix_(gk, gk)].mean()
            )
        values[rep] = n * total
    meta = _base_meta(MODE_K_SAMPLE, b, seed) | {
        "counts": ",".join(str(c) for c in counts),
        "d": str(grid.d),
        "grid": grid.descriptor(),
    }
    return _finish(values, MODE_K_SAMPLE, meta)


def null_sample_symmetry(n: int, d: int, b: int, seed: int) -> NullTable:
    """Null table of (n/2) * energy_sq for the symmetry test.

    Under the null the rank configuration is uniform over the 2^n n!
    ways of permuting the n grid pairs and orienting each pair, so each
    replicate draws one uniform permutation of the pairs plus n fair coin
    flips choosing which half of each pair carries the X label.
    """
    _check_b(b)
    grid = qmc.halton_grid(n, 2 * d)
    halves = np.vstack([grid.points[:, :d], grid.points[:, d:]])  # (2n, d)
    dist = cdist(halves, halves)
    scale = n / 2.0
    values = np.empty(b)
    for rep in range(b):
        rng = replicate_rng(seed, rep)
        pi = rng.permutation(n)
        flips = rng.random(n) < 0.5
        xi = pi + n * flips
        yi = pi + n * (~flips)
        re2 = (
            2.0 * dist[np.ix_(xi, yi)].mean()
            - dist[np.ix_(xi, xi)].mean()
            - dist[np.ix_(yi, yi)].mean()
        )
        values[rep] = scale * re2
    meta = _base_meta(MODE_SYMMETRY, b, seed) | {
        "n": str(n),
        "d": str(d),
        "grid": grid.descriptor(),
    }
    return _finish(values, MODE_SYMMETRY, meta)


def _centered(dist: np.ndarray) -> np.ndarray:
    return (
        dist
        - dist.mean(axis=0, keepdims=True)
        - dist.mean(axis=1, keepdims=True)
        + dist.mean()
    )


def critical_value(table: NullTable, alpha: float) -> float:
    """Smallest table value whose exceedance fraction is at most alpha.

    Returns the ascending order statistic at index ceil((1-alpha)*B) + 1
    (1-indexed), clamped to B. The 1e-9 nudge keeps (1-alpha)*B values
    that are integers up to float rounding on the correct side of the
    ceiling.
    """
    if not (0.0 < alpha < 1.0):
        raise UsageError(f"alpha must lie in (0, 1), got {alpha}")
    b = table.b
    k = math.ceil((1.0 - alpha) * b - 1e-9) + 1
    k = min(max(k, 1), b)
    return float(table.samples[k - 1])


def p_value(table: NullTable, observed: float) -> float:
    """Monte Carlo p-value (1 + #{samples >= observed}) / (B + 1)."""
    b = table.b
    count_ge = b - int(np.searchsorted(table.samples, observed, side="left"))
    return (1 + count_ge) / (b + 1)


def save_table(table: NullTable, path) -> None:
    """Write a table as UTF-8 text: '#' key=value headers then one sample
    per line in shortest round-trip decimal form."""
    keys = ["format-version", "mode", "rng", "seed", "b"]
    rest = sorted(k for k in table.meta if k not in keys)
    with open(path, "w", encoding="utf-8") as fh:
        for key in keys + rest:
            fh.write(f"# {key}={table.meta[key]}\n")
        for v in table.samples:
            fh.write(repr(float(v)) + "\n")


def load_table(path, expect_meta: dict | None = None) -> NullTable:
    """Read a table written by :func:`save_table`.

    If ``expect_meta`` is given, every key in it must match the stored
    metadata exactly; a mismatch raises :class:`MetadataError` so a wrong
    table is never silently reused.
    """
    meta: dict = {}
    values = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" not in body:
                        raise ParseError(f"{path}: bad header at line {lineno}")
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                else:
                    values.append(float(line))
    except (OSError, ValueError) as exc:
        raise ParseError(f"could not read null table {path}: {exc}") from exc
    if meta.get("format-version") != FORMAT_VERSION:
        raise ParseError(
            f"{path}: unsupported format-version {meta.get('format-version')!r}"
        )
    mode = meta.get("mode")
    if mode not in _MODES:
        raise ParseError(f"{path}: unknown mode {mode!r}")
    if not values:
        raise ParseError(f"{path}: table holds no samples")
    if int(meta.get("b", "-1")) != len(values):
        raise ParseError(
            f"{path}: header says b={meta.get('b')} but {len(values)} samples found"
        )
    samples = np.asarray(values)
    if np.any(np.diff(samples) < 0):
        raise ParseError(f"{path}: samples are not sorted ascending")
    if expect_meta is not None:
        bad = {
            k: (v, meta.get(k))
            for k, v in expect_meta.items()
            if meta.get(k) != str(v)
        }
        if bad:
            detail = ", ".join(
                f"{k}: expected {want!r}, table has {got!r}"
                for k, (want, got) in sorted(bad.items())
            )
            raise MetadataError(f"null table {path} does not match the request ({detail})")
    samples.setflags(write=False)
    return NullTable(samples=samples, mode=mode, meta=meta)


def table_cache_dir() -> str | None:
    """Directory for cached tables, from the OT_RANKS_TABLE_DIR variable."""
    return os.environ.get("OT_RANKS_TABLE_DIR") or None
