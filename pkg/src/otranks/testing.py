"""End-to-end hypothesis tests: data in, TestReport out.

Each test computes the rank-based statistic, scales it, and compares it
against a permutation-Monte-Carlo null table. The decision rule is
reject iff scaled statistic >= critical value; the Monte Carlo p-value
(1 + #{table >= observed}) / (B + 1) from the same table is reported
alongside and is consistent with the decision rule.

Null tables are resolved in this order: an explicit NullTable object, an
explicit file path (validated against the request metadata), a cache
directory (the OT_RANKS_TABLE_DIR environment variable or the
``table_dir`` argument; generated-and-saved on a miss), else generated
in memory.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import nulldist, qmc, ranks, stats
from .errors import ShapeError, UsageError

SCHEMA_VERSION = 1

KIND_RDCOV = "rdcov"
KIND_ENERGY = "energy"
KIND_K_INDEP = "k_indep"
KIND_K_SAMPLE = "k_sample"
KIND_SYMMETRY = "symmetry"


@dataclass
class TestReport:
    """Outcome of one hypothesis test plus everything needed to replay it."""

    test_kind: str
    statistic_raw: float
    statistic_scaled: float
    scale_factor: float
    scaling: str
    p_value: float
    alpha: float
    critical_value: float
    reject: bool
    n: int | None
    m: int | None
    counts: tuple[int, ...] | None
    dims: tuple[int, ...]
    grids: tuple[str, ...]
    b: int
    seed: int
    warnings: tuple[str, ...] = ()
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        # Wall-clock timings are the one nondeterministic field; they are
        # omitted from serialized reports by default so identical inputs
        # and seed produce byte-identical output.
        return {
            "schema": SCHEMA_VERSION,
            "test_kind": self.test_kind,
            "statistic_raw": self.statistic_raw,
            "statistic_scaled": self.statistic_scaled,
            "scale_factor": self.scale_factor,
            "scaling": self.scaling,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "n": self.n,
            "m": self.m,
            "counts": list(self.counts) if self.counts is not None else None,
            "dims": list(self.dims),
            "grids": list(self.grids),
            "b": self.b,
            "seed": self.seed,
            "warnings": list(self.warnings),
            "timings": self.timings if include_timings else None,
        }

    def to_json(self, indent: int | None = 2, include_timings: bool = False) -> str:
        return json.dumps(
            self.to_dict(include_timings), indent=indent, sort_keys=False
        )


def fresh_seed() -> int:
    """Entropy-derived seed for runs where the caller supplied none."""
    return int(np.random.SeedSequence().entropy) % (2**63)


def _cache_path(table_dir: str, mode: str, meta: dict) -> str:
    key = "|".join(f"{k}={meta[k]}" for k in sorted(meta))
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    return os.path.join(table_dir, f"{mode}-{digest}.nulltab")


def _resolve_table(
    mode: str,
    config: dict,
    b: int,
    seed: int,
    sampler,
    *,
    table_path=None,
    table_dir=None,
    null_table: nulldist.NullTable | None = None,
) -> tuple[nulldist.NullTable, float]:
    """Find or build a null table for the statistical configuration.

    ``config`` holds the fields that identify the null law (mode, counts,
    dimensions, grid descriptors) and must always match. An explicitly
    supplied table or path may carry any (b, seed): those are provenance
    and are reported from the table itself. Cache-dir lookups key on the
    full (config, b, seed) so repeated runs are reproducible.
    """
    t0 = time.perf_counter()
    if null_table is not None:
        bad = {
            k: (v, null_table.meta.get(k))
            for k, v in config.items()
            if null_table.meta.get(k) != str(v)
        }
        if bad:
            raise UsageError(f"supplied null table does not match the request: {bad}")
        return null_table, time.perf_counter() - t0
    if table_path is not None:
        table = nulldist.load_table(table_path, expect_meta=config)
        return table, time.perf_counter() - t0
    full = config | {"b": b, "seed": seed}
    table_dir = table_dir or nulldist.table_cache_dir()
    if table_dir:
        path = _cache_path(table_dir, mode, full)
        if os.path.exists(path):
            table = nulldist.load_table(path, expect_meta=full)
            return table, time.perf_counter() - t0
        table = sampler()
        os.makedirs(table_dir, exist_ok=True)
        nulldist.save_table(table, path)
        return table, time.perf_counter() - t0
    return sampler(), time.perf_counter() - t0


def _decide(
    table: nulldist.NullTable, scaled: float, alpha: float
) -> tuple[float, float, bool]:
    crit = nulldist.critical_value(table, alpha)
    pval = nulldist.p_value(table, scaled)
    return crit, pval, bool(scaled >= crit)


def _as_cloud(x) -> ranks.PointCloud:
    return x if isinstance(x, ranks.PointCloud) else ranks.PointCloud.from_rows(x)


def rdcov_test(
    x,
    y,
    *,
    grid_x: qmc.RankGrid | None = None,
    grid_y: qmc.RankGrid | None = None,
    b: int = nulldist.DEFAULT_B,
    alpha: float = nulldist.DEFAULT_ALPHA,
    seed: int | None = None,
    prerank: bool = False,
    table_path=None,
    table_dir=None,
    null_table: nulldist.NullTable | None = None,
    extra_warnings: tuple[str, ...] = (),
) -> TestReport:
    """Mutual independence test of two paired samples via the rank
    distance covariance, scaled by n."""
    x = _as_cloud(x)
    y = _as_cloud(y)
    if x.n != y.n:
        raise ShapeError(f"paired samples need equal counts, got {x.n} and {y.n}")
    n = x.n
    warns = list(extra_warnings)
    if prerank:
        x, wx = ranks.coordinatewise_prerank(x)
        y, wy = ranks.coordinatewise_prerank(y)
        warns += [f"prerank x: {w}" for w in wx] + [f"prerank y: {w}" for w in wy]
    grid_x = grid_x if grid_x is not None else qmc.default_grid(n, x.d)
    grid_y = grid_y if grid_y is not None else qmc.default_grid(n, y.d)
    seed = fresh_seed() if seed is None else int(seed)

    t0 = time.perf_counter()
    rmx = ranks.empirical_ranks(x, grid_x)
    rmy = ranks.empirical_ranks(y, grid_y)
    raw = stats.dcov_sq(rmx.ranks, rmy.ranks)
    rank_s = time.perf_counter() - t0
    warns += [f"x ranks: {w}" for w in rmx.warnings]
    warns += [f"y ranks: {w}" for w in rmy.warnings]

    scale = float(n)
    scaled = scale * raw
    config = {
        "mode": nulldist.MODE_RDCOV,
        "n": n,
        "d1": x.d,
        "d2": y.d,
        "grid1": grid_x.descriptor(),
        "grid2": grid_y.descriptor(),
    }
    table, null_s = _resolve_table(
        nulldist.MODE_RDCOV,
        config,
        b,
        seed,
        lambda: nulldist.null_sample_rdcov(n, grid_x, grid_y, b, seed),
        table_path=table_path,
        table_dir=table_dir,
        null_table=null_table,
    )
    seed = int(table.meta["seed"])
    crit, pval, reject = _decide(table, scaled, alpha)
    return TestReport(
        test_kind=KIND_RDCOV,
        statistic_raw=raw,
        statistic_scaled=scaled,
        scale_factor=scale,
        scaling="n",
        p_value=pval,
        alpha=alpha,
        critical_value=crit,
        reject=reject,
        n=n,
        m=None,
        counts=None,
        dims=(x.d, y.d),
        grids=(grid_x.descriptor(), grid_y.descriptor()),
        b=table.b,
        seed=seed,
        warnings=tuple(warns),
        timings={"ranks_s": rank_s, "null_s": null_s},
    )


def re_test(
    x,
    y,
    *,
    grid: qmc.RankGrid | None = None,
    b: int = nulldist.DEFAULT_B,
    alpha: float = nulldist.DEFAULT_ALPHA,
    seed: int | None = None,
    table_path=None,
    table_dir=None,
    null_table: nulldist.NullTable | None = None,
    extra_warnings: tuple[str, ...] = (),
) -> TestReport:
    """Two-sample goodness-of-fit test via the rank energy statistic,
    scaled by mn/(m+n)."""
    x = _as_cloud(x)
    y = _as_cloud(y)
    if x.d != y.d:
        raise ShapeError(f"samples need a shared dimension, got {x.d} and {y.d}")
    m, n = x.n, y.n
    grid = grid if grid is not None else qmc.default_grid(m + n, x.d)
    seed = fresh_seed() if seed is None else int(seed)

    t0 = time.perf_counter()
    pooled = ranks.pooled_ranks([x, y], grid)
    raw = stats.energy_sq(pooled.slices[0], pooled.slices[1])
    rank_s = time.perf_counter() - t0
    warns = list(extra_warnings) + [f"pooled ranks: {w}" for w in pooled.map.warnings]

    scale = m * n / (m + n)
    scaled = scale * raw
    config = {
        "mode": nulldist.MODE_ENERGY,
        "m": m,
        "n": n,
        "d": x.d,
        "grid": grid.descriptor(),
    }
    table, null_s = _resolve_table(
        nulldist.MODE_ENERGY,
        config,
        b,
        seed,
        lambda: nulldist.null_sample_re(m, n, grid, b, seed),
        table_path=table_path,
        table_dir=table_dir,
        null_table=null_table,
    )
    seed = int(table.meta["seed"])
    crit, pval, reject = _decide(table, scaled, alpha)
    return TestReport(
        test_kind=KIND_ENERGY,
        statistic_raw=raw,
        statistic_scaled=scaled,
        scale_factor=scale,
        scaling="mn/(m+n)",
        p_value=pval,
        alpha=alpha,
        critical_value=crit,
        reject=reject,
        n=n,
        m=m,
        counts=None,
        dims=(x.d,),
        grids=(grid.descriptor(),),
        b=table.b,
        seed=seed,
        warnings=tuple(warns),
        timings={"ranks_s": rank_s, "null_s": null_s},
    )


def k_indep_test(
    x,
    block_dims,
    *,
    grids=None,
    b: int = nulldist.DEFAULT_B,
    alpha: float = nulldist.DEFAULT_ALPHA,
    seed: int | None = None,
    prerank: bool = False,
    table_path=None,
    table_dir=None,
    null_table: nulldist.NullTable | None = None,
    extra_warnings: tuple[str, ...] = (),
) -> TestReport:
    """Mutual independence test of K column blocks of one sample.

    Block j is ranked marginally once; the statistic sums, over
    j = 1..K-1, the distance covariance between block j's ranks and the
    concatenation of the rank vectors of blocks j+1..K. Scaled by n.
    """
    x = _as_cloud(x)
    block_dims = tuple(int(d) for d in block_dims)
    if len(block_dims) < 2:
        raise UsageError("k-independence needs at least K=2 blocks")
    if any(d < 1 for d in block_dims):
        raise UsageError(f"block dims must be positive, got {block_dims}")
    if sum(block_dims) != x.d:
        raise ShapeError(
            f"block dims {block_dims} do not partition the {x.d} data columns"
        )
    n = x.n
    k = len(block_dims)
    warns = list(extra_warnings)
    if prerank:
        x, wx = ranks.coordinatewise_prerank(x)
        warns += [f"prerank: {w}" for w in wx]
    edges = np.cumsum((0,) + block_dims)
    blocks = [
        ranks.PointCloud.from_rows(x.rows[:, edges[j] : edges[j + 1]])
        for j in range(k)
    ]
    if grids is None:
        grids = [qmc.default_grid(n, d) for d in block_dims]
    else:
        grids = list(grids)
        if len(grids) != k:
            raise UsageError(f"expected {k} grids, got {len(grids)}")
    seed = fresh_seed() if seed is None else int(seed)

    t0 = time.perf_counter()
    rank_arrays = []
    for blk, g in zip(blocks, grids):
        rm = ranks.empirical_ranks(blk, g)
        warns += [f"block ranks: {w}" for w in rm.warnings]
        rank_arrays.append(rm.ranks)
    raw = 0.0
    for j in range(k - 1):
        rest = np.hstack(rank_arrays[j + 1 :])
        raw += stats.dcov_sq(rank_arrays[j], rest)
    rank_s = time.perf_counter() - t0

    scale = float(n)
    scaled = scale * raw
    config = {
        "mode": nulldist.MODE_K_INDEP,
        "n": n,
        "k": k,
        "dims": ",".join(str(d) for d in block_dims),
        "grids": ",".join(g.descriptor() for g in grids),
    }
    table, null_s = _resolve_table(
        nulldist.MODE_K_INDEP,
        config,
        b,
        seed,
        lambda: nulldist.null_sample_k_indep(n, grids, b, seed),
        table_path=table_path,
        table_dir=table_dir,
        null_table=null_table,
    )
    seed = int(table.meta["seed"])
    crit, pval, reject = _decide(table, scaled, alpha)
    return TestReport(
        test_kind=KIND_K_INDEP,
        statistic_raw=raw,
        statistic_scaled=scaled,
        scale_factor=scale,
        scaling="n",
        p_value=pval,
        alpha=alpha,
        critical_value=crit,
        reject=reject,
        n=n,
        m=None,
        counts=None,
        dims=block_dims,
        grids=tuple(g.descriptor() for g in grids),
        b=table.b,
        seed=seed,
        warnings=tuple(warns),
        timings={"ranks_s": rank_s, "null_s": null_s},
    )


def k_sample_test(
    samples,
    *,
    grid: qmc.RankGrid | None = None,
    b: int = nulldist.DEFAULT_B,
    alpha: float = nulldist.DEFAULT_ALPHA,
    seed: int | None = None,
    table_path=None,
    table_dir=None,
    null_table: nulldist.NullTable | None = None,
    extra_warnings: tuple[str, ...] = (),
) -> TestReport:
    """K-sample equality-of-distributions test: one pooled rank map, the
    energy statistic summed over consecutive sample pairs, scaled by the
    pooled count n."""
    samples = [_as_cloud(s) for s in samples]
    if len(samples) < 2:
        raise UsageError("k-sample needs at least K=2 samples")
    d = samples[0].d
    counts = tuple(s.n for s in samples)
    n = sum(counts)
    grid = grid if grid is not None else qmc.default_grid(n, d)
    seed = fresh_seed() if seed is None else int(seed)

    t0 = time.perf_counter()
    pooled = ranks.pooled_ranks(samples, grid)
    raw = 0.0
    for j in range(len(samples) - 1):
        raw += stats.energy_sq(pooled.slices[j], pooled.slices[j + 1])
    rank_s = time.perf_counter() - t0
    warns = list(extra_warnings) + [f"pooled ranks: {w}" for w in pooled.map.warnings]

    scale = float(n)
    scaled = scale * raw
    config = {
        "mode": nulldist.MODE_K_SAMPLE,
        "counts": ",".join(str(c) for c in counts),
        "d": d,
        "grid": grid.descriptor(),
    }
    table, null_s = _resolve_table(
        nulldist.MODE_K_SAMPLE,
        config,
        b,
        seed,
        lambda: nulldist.null_sample_k_sample(counts, grid, b, seed),
        table_path=table_path,
        table_dir=table_dir,
        null_table=null_table,
    )
    seed = int(table.meta["seed"])
    crit, pval, reject = _decide(table, scaled, alpha)
    return TestReport(
        test_kind=KIND_K_SAMPLE,
        statistic_raw=raw,
        statistic_scaled=scaled,
        scale_factor=scale,
        scaling="n (pooled count)",
        p_value=pval,
        alpha=alpha,
        critical_value=crit,
        reject=reject,
        n=n,
        m=None,
        counts=counts,
        dims=(d,),
        grids=(grid.descriptor(),),
        b=table.b,
        seed=seed,
        warnings=tuple(warns),
        timings={"ranks_s": rank_s, "null_s": null_s},
    )


def symmetry_test(
    x,
    *,
    b: int = nulldist.DEFAULT_B,
    alpha: float = nulldist.DEFAULT_ALPHA,
    seed: int | None = None,
    table_path=None,
    table_dir=None,
    null_table: nulldist.NullTable | None = None,
    extra_warnings: tuple[str, ...] = (),
) -> TestReport:
    """Test of central symmetry (X equal in law to -X) via paired ranks
    and the energy statistic, scaled by n/2.

    The n/2 factor is the two-sample scale mn/(m+n) with m = n
    pseudo-samples; the scaling choice is recorded in the report.
    """
    x = _as_cloud(x)
    n, d = x.n, x.d
    seed = fresh_seed() if seed is None else int(seed)

    t0 = time.perf_counter()
    sym = ranks.paired_symmetry_ranks(x)
    raw = stats.energy_sq(sym.x_ranks, sym.neg_x_ranks)
    rank_s = time.perf_counter() - t0
    warns = list(extra_warnings) + [f"paired ranks: {w}" for w in sym.warnings]

    scale = n / 2.0
    scaled = scale * raw
    config = {
        "mode": nulldist.MODE_SYMMETRY,
        "n": n,
        "d": d,
        "grid": sym.pair_grid.descriptor(),
    }
    table, null_s = _resolve_table(
        nulldist.MODE_SYMMETRY,
        config,
        b,
        seed,
        lambda: nulldist.null_sample_symmetry(n, d, b, seed),
        table_path=table_path,
        table_dir=table_dir,
        null_table=null_table,
    )
    seed = int(table.meta["seed"])
    crit, pval, reject = _decide(table, scaled, alpha)
    return TestReport(
        test_kind=KIND_SYMMETRY,
        statistic_raw=raw,
        statistic_scaled=scaled,
        scale_factor=scale,
        scaling="n/2 (two-sample factor with m = n)",
        p_value=pval,
        alpha=alpha,
        critical_value=crit,
        reject=reject,
        n=n,
        m=None,
        counts=None,
        dims=(d,),
        grids=(sym.pair_grid.descriptor(),),
        b=table.b,
        seed=seed,
        warnings=tuple(warns),
        timings={"ranks_s": rank_s, "null_s": null_s},
    )
