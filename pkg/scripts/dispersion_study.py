"""Measured vs predicted first-order response of I at a flat interface.

For a flat height a perturbed by amplitude*cos(kx), the flux response
divided by the amplitude should approach -(k/a)coth(ka). The table below
sweeps modes and resolutions so the spatial convergence of the measured
multiplier is visible directly.
"""

import argparse

import numpy as np

from heleshaw.analysis import dispersion_multiplier, measured_dispersion_multiplier
from heleshaw.geometry import PeriodicGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--height", type=float, default=1.0)
    ap.add_argument("--amplitude", type=float, default=0.02)
    ap.add_argument("--modes", type=int, nargs="+", default=[1, 2, 4])
    ap.add_argument("--resolutions", type=int, nargs="+",
                    default=[64, 128, 256])
    args = ap.parse_args()

    a = args.height
    period = 2.0 * np.pi
    print(f"flat height a = {a}, amplitude = {args.amplitude}")
    print(f"{'mode':>4} {'n':>5} {'measured':>12} {'predicted':>12} {'rel err':>10}")
    for mode in args.modes:
        k = 2.0 * np.pi * mode / period
        predicted = dispersion_multiplier(a, k)
        for n in args.resolutions:
            grid = PeriodicGrid(n, n, period, 2.0 * a)
            measured = measured_dispersion_multiplier(
                a, mode, grid, amplitude=args.amplitude)
            rel = abs(measured - predicted) / abs(predicted)
            print(f"{mode:>4} {n:>5} {measured:>12.6f} {predicted:>12.6f} "
                  f"{rel:>10.2e}")


if __name__ == "__main__":
    main()
