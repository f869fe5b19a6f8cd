"""Error of the stepped midpoint propagator against the closed form under step halving."""

import argparse
import math

import numpy as np

from tpmwb import smallmat as sm
from tpmwb.propagator import exact_propagator, stepped_propagator
from tpmwb.spinsys import ResonanceParams, driven_hamiltonian, frame_params


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--start", type=int, default=100)
    ap.add_argument("--levels", type=int, default=8)
    ap.add_argument("--periods", type=float, default=1.0, help="evolution time in units of 2 pi / Omega")
    args = ap.parse_args()

    p = ResonanceParams.from_f(1.0, 0.1, 0.8, 0.5)
    t = args.periods * 2 * math.pi / frame_params(p).omega_rabi
    exact = exact_propagator(p, t).matrix
    prev = None
    print(f"{'steps':>9} {'max error':>12} {'order':>7}")
    for level in range(args.levels):
        steps = args.start * 2**level
        u = stepped_propagator(lambda ts: driven_hamiltonian(p, ts), t, steps, vectorized=True).matrix
        err = sm.max_norm(u - exact)
        order = "" if prev is None else f"{np.log2(prev / err):7.3f}"
        print(f"{steps:>9d} {err:12.3e} {order:>7}")
        prev = err


if __name__ == "__main__":
    main()
