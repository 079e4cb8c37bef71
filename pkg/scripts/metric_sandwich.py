"""Distance bounds on random pairs: sandwich check and dilation homogeneity.

    python3 scripts/metric_sandwich.py --n 1 --k 1 --pairs 100 --csv sandwich.csv
"""

import argparse
import csv
import sys

import numpy as np

from jetcarnot.jetcore import JetPoint, JetShape, dilate
from jetcarnot.paths import PathOptions, cc_upper_bound, distance_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--L", nargs="+", type=float, default=[2.0, 4.0])
    ap.add_argument("--steps", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", default=None, help="per-pair output file")
    args = ap.parse_args()
    shape = JetShape(args.n, args.k)
    opts = PathOptions(steps=args.steps, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    out = open(args.csv, "w", newline="") if args.csv else None
    writer = csv.writer(out) if out else None
    if writer:
        writer.writerow(["pair", "lower", "r0_upper", "cc_upper"] + [f"ratio_L{L:g}" for L in args.L])
    fails, worst = 0, 0.0
    for i in range(args.pairs):
        p = JetPoint(shape, rng.uniform(-1, 1, shape.total_dim))
        q = JetPoint(shape, rng.uniform(-1, 1, shape.total_dim))
        b = distance_bounds(p, q, opts)
        fails += not b.sandwich_ok
        ratios = [cc_upper_bound(dilate(L, p), dilate(L, q), opts) / b.cc_upper for L in args.L]
        worst = max([worst] + [abs(r / L - 1) for r, L in zip(ratios, args.L)])
        if writer:
            writer.writerow([i, repr(b.lower), repr(b.r0_upper), repr(b.cc_upper)] + [repr(r) for r in ratios])
    if out:
        out.close()
    print(f"{args.pairs} pairs in J^{args.k}(R^{args.n}): {fails} sandwich failures, max |ratio/L - 1| = {worst:.2e}")
    sys.exit(1 if fails else 0)


if __name__ == "__main__":
    main()
