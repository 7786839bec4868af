"""Command-line interface.

Machine-first: reports go to stdout as JSON (or to --out), diagnostics
to stderr. Exit codes: 0 success (a statistical rejection is a result,
not an error), 2 usage error, 3 data error, 4 internal-consistency
error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import nulldist, qmc, ranks, simgen, testing
from .errors import (
    DataError,
    InternalConsistencyError,
    OtranksError,
    UsageError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def parse_csv(path, has_header: bool = False) -> ranks.PointCloud:
    """Read a CSV of comma-separated decimal fields, one observation per
    row. Ragged rows and non-finite values are rejected with the row
    (and column) location."""
    rows = []
    width = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1 and has_header:
                continue
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DataError(
                    f"{path}: row {lineno} has {len(fields)} fields, expected {width}"
                )
            parsed = []
            for col, f in enumerate(fields, start=1):
                try:
                    v = float(f)
                except ValueError as exc:
                    raise DataError(
                        f"{path}: row {lineno}, column {col}: not a number: {f!r}"
                    ) from exc
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: row {lineno}, column {col}: non-finite value {f!r}"
                    )
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return ranks.PointCloud.from_rows(rows)


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = testing.fresh_seed()
    print(f"no --seed given; drew entropy seed {seed}", file=sys.stderr)
    return seed


def _load_grid(args, n: int, d: int) -> qmc.RankGrid | None:
    if getattr(args, "grid_file", None):
        return qmc.load_grid_csv(args.grid_file)
    kind = getattr(args, "grid", "auto")
    if kind == "auto":
        return None
    if kind == qmc.HALTON:
        return qmc.halton_grid(n, d)
    if kind == qmc.LATTICE1D:
        if d != 1:
            raise UsageError("--grid lattice1d requires one-dimensional data")
        return qmc.lattice1d(n)
    raise UsageError(f"unknown grid kind {kind!r}")


def _maybe_jitter(cloud: ranks.PointCloud, args, seed: int, warns: list) -> ranks.PointCloud:
    scale = getattr(args, "jitter", None)
    if not scale:
        return cloud
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x6A17])))
    noise = (rng.random(cloud.rows.shape) - 0.5) * scale
    warns.append(f"jitter applied: uniform(-{scale / 2}, {scale / 2}), derived from seed {seed}")
    return ranks.PointCloud.from_rows(cloud.rows + noise)


def _add_common(p, *, table: bool = True) -> None:
    p.add_argument("--b", type=int, default=nulldist.DEFAULT_B, help="null-table replicates")
    p.add_argument("--alpha", type=float, default=nulldist.DEFAULT_ALPHA)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.add_argument("--header", action="store_true", help="input CSVs carry a header row")
    p.add_argument("--jitter", type=float, default=None, metavar="SCALE",
                   help="opt-in: perturb inputs by centered uniform noise of this scale")
    p.add_argument("--threads", type=int, default=None,
                   help="cap internal parallelism (results do not depend on it)")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in the JSON (breaks byte determinism)")
    if table:
        p.add_argument("--table", default=None, help="path of a cached null table to reuse")
        p.add_argument("--table-dir", default=None,
                       help="null-table cache directory (default: $OT_RANKS_TABLE_DIR)")


def _check_common(args) -> None:
    if not (0.0 < args.alpha < 1.0):
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if args.b < 1:
        raise UsageError(f"--b must be >= 1, got {args.b}")


def _report_kwargs(args, seed):
    return {
        "b": args.b,
        "alpha": args.alpha,
        "seed": seed,
        "table_path": args.table,
        "table_dir": args.table_dir,
    }


def _cmd_ranks(args) -> int:
    cloud = parse_csv(args.x, args.header)
    grid = _load_grid(args, cloud.n, cloud.d) or qmc.default_grid(cloud.n, cloud.d)
    rmap = ranks.empirical_ranks(cloud, grid)
    for w in rmap.warnings:
        print(f"warning: {w}", file=sys.stderr)
    lines = [",".join(repr(float(v)) for v in row) for row in rmap.ranks]
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def _cmd_indep(args) -> int:
    _check_common(args)
    seed = _resolve_seed(args)
    warns: list = []
    x = _maybe_jitter(parse_csv(args.x, args.header), args, seed, warns)
    y = _maybe_jitter(parse_csv(args.y, args.header), args, seed + 1, warns)
    gx = _load_grid(args, x.n, x.d)
    gy = _load_grid(args, y.n, y.d)
    report = testing.rdcov_test(
        x, y, grid_x=gx, grid_y=gy, prerank=args.prerank,
        extra_warnings=tuple(warns), **_report_kwargs(args, seed),
    )
    _emit(report.to_json(include_timings=args.timings), args.out)
    return EXIT_OK


def _cmd_two_sample(args) -> int:
    _check_common(args)
    seed = _resolve_seed(args)
    warns: list = []
    x = _maybe_jitter(parse_csv(args.x, args.header), args, seed, warns)
    y = _maybe_jitter(parse_csv(args.y, args.header), args, seed + 1, warns)
    grid = _load_grid(args, x.n + y.n, x.d)
    report = testing.re_test(
        x, y, grid=grid, extra_warnings=tuple(warns), **_report_kwargs(args, seed)
    )
    _emit(report.to_json(include_timings=args.timings), args.out)
    return EXIT_OK


def _cmd_k_indep(args) -> int:
    _check_common(args)
    seed = _resolve_seed(args)
    warns: list = []
    x = _maybe_jitter(parse_csv(args.x, args.header), args, seed, warns)
    try:
        block_dims = tuple(int(f) for f in args.blocks.split(","))
    except ValueError as exc:
        raise UsageError(f"--blocks must be comma-separated integers: {exc}") from exc
    report = testing.k_indep_test(
        x, block_dims, prerank=args.prerank,
        extra_warnings=tuple(warns), **_report_kwargs(args, seed),
    )
    _emit(report.to_json(include_timings=args.timings), args.out)
    return EXIT_OK


def _cmd_k_sample(args) -> int:
    _check_common(args)
    seed = _resolve_seed(args)
    warns: list = []
    paths = args.inputs.split(",")
    if len(paths) < 2:
        raise UsageError("--inputs needs at least two comma-separated CSV paths")
    samples = [
        _maybe_jitter(parse_csv(p, args.header), args, seed + k, warns)
        for k, p in enumerate(paths)
    ]
    report = testing.k_sample_test(
        samples, extra_warnings=tuple(warns), **_report_kwargs(args, seed)
    )
    _emit(report.to_json(include_timings=args.timings), args.out)
    return EXIT_OK


def _cmd_symmetry(args) -> int:
    _check_common(args)
    seed = _resolve_seed(args)
    warns: list = []
    x = _maybe_jitter(parse_csv(args.x, args.header), args, seed, warns)
    report = testing.symmetry_test(
        x, extra_warnings=tuple(warns), **_report_kwargs(args, seed)
    )
    _emit(report.to_json(include_timings=args.timings), args.out)
    return EXIT_OK


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(f) for f in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--dims must be comma-separated integers: {exc}") from exc


def _cmd_null_table(args) -> int:
    if args.b < 1:
        raise UsageError(f"--b must be >= 1, got {args.b}")
    seed = _resolve_seed(args)
    mode = args.mode.replace("-", "_")
    if mode != nulldist.MODE_K_SAMPLE and args.n is None:
        raise UsageError(f"{args.mode} mode needs --n")
    if mode == nulldist.MODE_RDCOV:
        dims = _parse_dims(args.dims)
        if len(dims) != 2:
            raise UsageError("rdcov mode needs --dims d1,d2")
        table = nulldist.null_sample_rdcov(
            args.n,
            qmc.default_grid(args.n, dims[0]),
            qmc.default_grid(args.n, dims[1]),
            args.b,
            seed,
        )
    elif mode == nulldist.MODE_ENERGY:
        dims = _parse_dims(args.dims)
        if len(dims) != 1:
            raise UsageError("energy mode needs --dims d")
        if args.m is None:
            raise UsageError("energy mode needs --m")
        table = nulldist.null_sample_re(
            args.m, args.n, qmc.default_grid(args.m + args.n, dims[0]), args.b, seed
        )
    elif mode == nulldist.MODE_K_INDEP:
        dims = _parse_dims(args.dims)
        grids = [qmc.default_grid(args.n, d) for d in dims]
        table = nulldist.null_sample_k_indep(args.n, grids, args.b, seed)
    elif mode == nulldist.MODE_K_SAMPLE:
        dims = _parse_dims(args.dims)
        if len(dims) != 1:
            raise UsageError("k-sample mode needs --dims d")
        if not args.counts:
            raise UsageError("k-sample mode needs --counts n1,n2,...")
        counts = _parse_dims(args.counts)
        table = nulldist.null_sample_k_sample(
            counts, qmc.default_grid(sum(counts), dims[0]), args.b, seed
        )
    elif mode == nulldist.MODE_SYMMETRY:
        dims = _parse_dims(args.dims)
        if len(dims) != 1:
            raise UsageError("symmetry mode needs --dims d")
        table = nulldist.null_sample_symmetry(args.n, dims[0], args.b, seed)
    else:
        raise UsageError(f"unknown null-table mode {args.mode!r}")
    nulldist.save_table(table, args.out_path)
    print(f"wrote {table.b} samples to {args.out_path}", file=sys.stderr)
    return EXIT_OK


def _cmd_thresholds(args) -> int:
    if not (0.0 < args.alpha < 1.0):
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    seed = _resolve_seed(args)
    rows = []
    for dims_text in args.dims:
        dims = _parse_dims(dims_text)
        if args.mode == "rdcov":
            if len(dims) != 2:
                raise UsageError("--mode rdcov needs --dims d1,d2")
            table = nulldist.null_sample_rdcov(
                args.n,
                qmc.default_grid(args.n, dims[0]),
                qmc.default_grid(args.n, dims[1]),
                args.b,
                seed,
            )
        else:
            if len(dims) != 1:
                raise UsageError("--mode re needs --dims d")
            m = args.m if args.m is not None else args.n
            table = nulldist.null_sample_re(
                m, args.n, qmc.default_grid(m + args.n, dims[0]), args.b, seed
            )
        rows.append(
            {
                "mode": args.mode,
                "n": args.n,
                "m": args.m if args.mode == "re" else None,
                "dims": list(dims),
                "alpha": args.alpha,
                "b": args.b,
                "seed": seed,
                "critical_value": nulldist.critical_value(table, args.alpha),
            }
        )
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("mode,n,m,dims,alpha,b,seed,critical_value\n")
            for r in rows:
                fh.write(
                    f"{r['mode']},{r['n']},{'' if r['m'] is None else r['m']},"
                    f"{'x'.join(str(d) for d in r['dims'])},{r['alpha']},{r['b']},"
                    f"{r['seed']},{r['critical_value']!r}\n"
                )
    _emit(json.dumps(rows if len(rows) > 1 else rows[0], indent=2), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if not (0.0 < args.alpha < 1.0):
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    seed = _resolve_seed(args)
    setting = simgen.make_setting(
        args.setting, n=args.n, m=args.m, rho=args.rho, mu=args.mu
    )
    result = simgen.power_study(
        setting,
        args.test,
        replicates=args.reps,
        alpha=args.alpha,
        seed=seed,
        b=args.b,
    )
    if args.csv:
        with open(args.csv, "a", encoding="utf-8") as fh:
            fh.write(
                f"{result.setting_id},{result.test_kind},{result.alpha},"
                f"{result.replicates},{result.rejection_fraction!r},"
                f"{result.standard_error!r},{result.seed}\n"
            )
    _emit(json.dumps(result.to_dict(), indent=2), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="otranks",
        description="Distribution-free multivariate tests built on optimal-assignment ranks.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ranks", help="emit observation-order multivariate ranks as CSV")
    p.add_argument("--x", required=True, help="input CSV")
    p.add_argument("--grid", default="auto", choices=["auto", "halton", "lattice1d"])
    p.add_argument("--grid-file", default=None, help="CSV of a custom grid")
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_ranks)

    p = sub.add_parser("indep-test", help="mutual independence of two paired samples")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--grid", default="auto", choices=["auto", "halton", "lattice1d"])
    p.add_argument("--grid-file", default=None)
    p.add_argument("--prerank", action="store_true",
                   help="replace columns by 1-d ranks before the multivariate ranking")
    _add_common(p)
    p.set_defaults(func=_cmd_indep)

    p = sub.add_parser("two-sample", help="two-sample goodness of fit")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--grid", default="auto", choices=["auto", "halton", "lattice1d"])
    p.add_argument("--grid-file", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_two_sample)

    p = sub.add_parser("k-indep", help="mutual independence of K column blocks")
    p.add_argument("--x", required=True)
    p.add_argument("--blocks", required=True, help="comma-separated block dimensions")
    p.add_argument("--prerank", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_k_indep)

    p = sub.add_parser("k-sample", help="K-sample equality of distributions")
    p.add_argument("--inputs", required=True, help="comma-separated CSV paths")
    _add_common(p)
    p.set_defaults(func=_cmd_k_sample)

    p = sub.add_parser("symmetry", help="central symmetry of one sample")
    p.add_argument("--x", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_symmetry)

    p = sub.add_parser("null-table", help="generate and save a null table")
    p.add_argument("--mode", required=True,
                   choices=["rdcov", "energy", "k-indep", "k-sample", "symmetry"])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--counts", default=None)
    p.add_argument("--dims", required=True)
    p.add_argument("--b", type=int, default=nulldist.DEFAULT_B)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", dest="out_path", required=True)
    p.set_defaults(func=_cmd_null_table)

    p = sub.add_parser("thresholds", help="critical values for the scaled statistics")
    p.add_argument("--mode", required=True, choices=["rdcov", "re"])
    p.add_argument("--alpha", type=float, default=nulldist.DEFAULT_ALPHA)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--dims", action="append", required=True,
                   help="d1,d2 for rdcov, d for re; repeat for several rows")
    p.add_argument("--b", type=int, default=nulldist.DEFAULT_B)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--csv", default=None, help="also append rows to this CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_thresholds)

    p = sub.add_parser("simulate", help="rejection-frequency study on a synthetic setting")
    p.add_argument("--setting", required=True)
    p.add_argument("--test", default=None, choices=["rdcov", "energy"])
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--alpha", type=float, default=nulldist.DEFAULT_ALPHA)
    p.add_argument("--b", type=int, default=nulldist.DEFAULT_B)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--csv", default=None, help="append a summary row to this CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalConsistencyError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OtranksError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
