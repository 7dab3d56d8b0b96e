"""Linearization kernels of I at flat and curved base profiles.

Prints the local coefficient c0, the most negative off-diagonal weight
(the monotone structure predicts none below rounding), and the tail mass
at a ladder of radii. With --out the flat-base estimate is written as a
kernel JSON document compatible with the CLI's linearize output.
"""

import argparse
import json

import numpy as np

from heleshaw.analysis import linearize_I
from heleshaw.geometry import GraphInterface, PeriodicGrid


def describe(name, est, period):
    off = np.delete(est.weights, est.base_point)
    radii = [period / 8.0, period / 4.0, 3.0 * period / 8.0, period / 2.0]
    masses = ", ".join(f"{est.tail_mass(r):.3e}" for r in radii)
    print(f"{name}: c0 = {est.c0:+.6f}, min offdiag = {off.min():+.3e}")
    print(f"  tail mass at P/8, P/4, 3P/8, P/2: {masses}")
    return est


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--heights", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--out", help="write the last flat estimate as JSON")
    args = ap.parse_args()

    period = 2.0 * np.pi
    est = None
    for a in args.heights:
        grid = PeriodicGrid(args.n, args.n, period, 2.0 * a)
        flat = GraphInterface(np.full(args.n, a), grid, 0.05)
        est = describe(f"flat a={a} (predicted c0 {-1.0 / a**2:+.6f})",
                       linearize_I(flat), period)

    grid = PeriodicGrid(args.n, args.n, period, 2.5)
    x = grid.x_nodes()
    curved = GraphInterface(1.0 + 0.3 * np.sin(x), grid, 0.05)
    describe("curved 1 + 0.3 sin(x), based at column 0",
             linearize_I(curved), period)

    if args.out and est is not None:
        with open(args.out, "w") as fh:
            json.dump(est.as_dict(), fh, indent=2)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
