"""Constant-coefficient gap between the lattice form and the spectral form under refinement.

The gap is pure lattice error and scales like h^(2-2s); at s = 0.75 the
order is only 1/2, which makes small tolerances expensive.
"""
import argparse

import numpy as np

from fraclame.diagnostics import commutator_breakdown, windowed_wave
from fraclame.grid import GridSpec, plane_wave
from fraclame.nonlocal_form import Coefficient


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024, 2048, 4096])
    ap.add_argument("--field", choices=["plane", "windowed"], default="plane")
    args = ap.parse_args()
    A = Coefficient.constant(1.0)
    print("s,N,normalized_gap,observed_order")
    for s in args.s:
        prev = None
        for N in args.sizes:
            g = GridSpec(1, N)
            if args.field == "plane":
                u, phi = plane_wave(g, [1], [1.0]), plane_wave(g, [1], [1.0], phase=0.3)
            else:
                u, phi = windowed_wave(g, [3]), windowed_wave(g, [2], phase=0.7)
            gap = abs(commutator_breakdown(A, u, phi, s, s).normalized()[0])
            order = np.log2(prev / gap) if prev else float("nan")
            print(f"{s},{N},{gap:.6e},{order:.3f}")
            prev = gap


if __name__ == "__main__":
    main()
