"""Stokes residuals of the bundled test maps under grid refinement.

Prints residuals and observed orders for smooth and piecewise-linear maps.

    python3 scripts/stokes_convergence.py --dim 2 --N 8 16 32 64 128
"""

import argparse
import math

from jetcarnot.cli import stokes_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--N", nargs="+", type=int, default=[8, 16, 32, 64, 128])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rows = stokes_table(args.N, args.dim, args.seed)
    print(f"{'map':<10} {'N':>5} {'residual':>12} {'order':>7}")
    prev = {}
    for name, N, _, _, res in rows:
        order = ""  # residuals at rounding level carry no rate
        if name in prev and min(prev[name], res) > 1e-13:
            order = f"{math.log2(prev[name] / res):7.2f}"
        prev[name] = res
        print(f"{name:<10} {N:>5} {res:12.3e} {order:>7}")


if __name__ == "__main__":
    main()
