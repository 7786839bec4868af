#!/usr/bin/env python3
"""Reproduce the rejection-frequency benchmark rows.

Runs R generate-and-test cycles per synthetic setting against one shared
null table and prints one CSV row per setting.

Examples:
    python scripts/power_table.py --family indep --n 200 --reps 1000
    python scripts/power_table.py --settings TS_V1,TS_V6,TS_V9 --reps 1000
"""

import argparse
import sys

from otranks import simgen


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", choices=["indep", "twosample"], default=None,
                    help="run every setting of one family")
    ap.add_argument("--settings", default=None, help="comma-separated setting ids")
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--m", type=int, default=None)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--b", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rho", type=float, default=0.5)
    ap.add_argument("--mu", type=float, default=0.3)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    if args.settings:
        ids = [s.strip().upper() for s in args.settings.split(",")]
    elif args.family == "indep":
        ids = [s for s in simgen.SETTING_IDS if s.startswith("IND_")]
    elif args.family == "twosample":
        ids = [s for s in simgen.SETTING_IDS if s.startswith("TS_")]
    else:
        ap.error("give --family or --settings")

    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    shared = {}
    try:
        out.write("setting,test_kind,alpha,replicates,rejection_fraction,standard_error,seed\n")
        for sid in ids:
            setting = simgen.make_setting(
                sid, n=args.n, m=args.m, rho=args.rho, mu=args.mu
            )
            key = (setting.family, setting.n, setting.m, setting.dims)
            if key not in shared:
                kind = simgen._TEST_FOR_FAMILY[setting.family]
                shared[key] = simgen.shared_null_table(setting, kind, args.b, args.seed)
            res = simgen.power_study(
                setting,
                replicates=args.reps,
                alpha=args.alpha,
                seed=args.seed,
                null_table=shared[key],
            )
            out.write(
                f"{res.setting_id},{res.test_kind},{res.alpha},{res.replicates},"
                f"{res.rejection_fraction!r},{res.standard_error!r},{res.seed}\n"
            )
            out.flush()
            print(
                f"{sid}: {res.rejection_fraction:.3f} "
                f"(se {res.standard_error:.3f}, {res.runtime_s:.0f}s)",
                file=sys.stderr,
            )
    finally:
        if args.out:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
