"""Work distributions Gamma_k for N spins at the Fig. 2 drive point.

    python scripts/reproduce_fig2.py --n 1 2 10 100
"""

import argparse
import math

from tpmwb.ensemble import ensemble_distribution, gaussian_approx, single_spin_weights, total_variation
from tpmwb.spinsys import ResonanceParams, frame_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1, 2, 10, 100])
    ap.add_argument("--f", type=float, default=0.5)
    ap.add_argument("--omega", type=float, default=0.8)
    ap.add_argument("--b1", type=float, default=0.1)
    ap.add_argument("--tail", type=float, default=1e-4, help="hide Gamma_k below this value")
    args = ap.parse_args()

    p = ResonanceParams.from_f(1.0, args.b1, args.omega, args.f)
    t = math.pi / frame_params(p).omega_rabi
    w = single_spin_weights(p, args.f, t)
    print(f"t = pi/Omega = {t:.6f}; single-spin weights (b-, b0, b+) = ({w.down_up:.4f}, {w.stay:.4f}, {w.up_down:.4f})")
    for n in args.n:
        e = ensemble_distribution(w, n, p.b0)
        g = gaussian_approx(p, args.f, t, n)
        print(f"\nN = {n}: mean {e.mean():.6g}, variance {e.variance():.6g}, "
              f"TV to Gaussian {total_variation(e, g):.4g}")
        print(f"{'k':>5} {'Gamma_k':>12} {'gaussian':>12}")
        dens = g.pdf(e.works) * p.b0
        for k, gk, gp in zip(e.ks, e.gammas, dens):
            if gk >= args.tail:
                print(f"{k:>5d} {gk:12.6f} {gp:12.6f}")


if __name__ == "__main__":
    main()
