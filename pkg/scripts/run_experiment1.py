"""Fischer with all three bounds equal to T: state counts per lowering.

    python scripts/run_experiment1.py --n 3 --range 2..9 --csv exp1.csv
"""

import argparse
import sys

from tickcheck.bench import VARIANTS, rows_to_csv, run_experiment1, write_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3, help="number of threads")
    ap.add_argument("--range", default="2..9", help="T values as LO..HI")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--max-states", type=int, default=None)
    ap.add_argument("--csv", help="write rows here instead of stdout")
    args = ap.parse_args(argv)
    lo, hi = (int(x) for x in args.range.split(".."))
    rows = run_experiment1(args.n, range(lo, hi + 1), workers=args.workers,
                           max_states=args.max_states)
    if args.csv:
        write_csv(rows, args.csv)
    else:
        sys.stdout.write(rows_to_csv(rows))

    print(file=sys.stderr)
    for method, mode in VARIANTS:
        counts = [r.states for r in rows if (r.method, r.mode) == (method, mode)]
        grow = counts[-1] / counts[0]
        print(f"{method:5} {mode:9} {counts}  x{grow:.2f} from T={lo} to T={hi}", file=sys.stderr)


if __name__ == "__main__":
    main()
