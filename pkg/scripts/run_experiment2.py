"""Fischer with db_u = dc_l = 4 and a growing dc_u, grouped by dc_u mod 4.

    python scripts/run_experiment2.py --n 3 --range 4..15 --csv exp2.csv
"""

import argparse
import sys

from tickcheck.bench import VARIANTS, rows_to_csv, run_experiment2, write_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3, help="number of threads")
    ap.add_argument("--range", default="5..12", help="dc_u values as LO..HI")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--max-states", type=int, default=None)
    ap.add_argument("--csv", help="write rows here instead of stdout")
    args = ap.parse_args(argv)
    lo, hi = (int(x) for x in args.range.split(".."))
    rows = run_experiment2(args.n, range(lo, hi + 1), workers=args.workers,
                           max_states=args.max_states)
    if args.csv:
        write_csv(rows, args.csv)
    else:
        sys.stdout.write(rows_to_csv(rows))

    print(file=sys.stderr)
    for method, mode in VARIANTS:
        counts = [r.states for r in rows if (r.method, r.mode) == (method, mode)]
        print(f"{method:5} {mode:9} {counts}  x{counts[-1] / counts[0]:.2f}", file=sys.stderr)
    print("\nleaping states by s = dc_u mod 4 (rows) and dc_u // 4 (columns):", file=sys.stderr)
    leap = {r.dc_u: r.states for r in rows if r.mode == "leaping"}
    for s in range(4):
        cells = [f"{u:>3}:{leap[u]:>7}" for u in sorted(leap) if u % 4 == s]
        print(f"  s={s}  " + "  ".join(cells), file=sys.stderr)


if __name__ == "__main__":
    main()
