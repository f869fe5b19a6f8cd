"""Probability of negative total work versus the number of spins, with a log-linear fit."""

import argparse
import math

import numpy as np

from tpmwb.ensemble import ensemble_violation_probability, iter_ensembles, single_spin_weights
from tpmwb.spinsys import ResonanceParams, frame_params


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=200)
    ap.add_argument("--f", type=float, default=0.5)
    ap.add_argument("--every", type=int, default=20, help="print every k-th N")
    args = ap.parse_args()

    p = ResonanceParams.from_f(1.0, 0.1, 0.8, args.f)
    w = single_spin_weights(p, args.f, math.pi / frame_params(p).omega_rabi)
    probs = np.array([ensemble_violation_probability(e, 0.0) for e in iter_ensembles(w, p.b0, args.n_max)])
    n = np.arange(1, args.n_max + 1)
    logs = np.log(probs)
    slope, intercept = np.polyfit(n, logs, 1)
    fit = slope * n + intercept
    r2 = 1 - np.sum((logs - fit) ** 2) / np.sum((logs - logs.mean()) ** 2)

    print(f"{'N':>5} {'Prob(W<0)':>14} {'fit':>14}")
    for i in range(0, args.n_max, args.every):
        print(f"{n[i]:>5d} {probs[i]:14.6e} {math.exp(fit[i]):14.6e}")
    print(f"\nln Prob = {slope:.5f} N + {intercept:.5f}  (R^2 = {r2:.5f})")
    # large-deviation rate from the saddle point of the single-spin generating function
    lam = 0.5 * math.log(w.up_down / w.down_up)
    rate = -math.log(w.stay + 2 * math.sqrt(w.up_down * w.down_up)) if lam > 0 else 0.0
    print(f"asymptotic decay rate (Chernoff bound at W = 0): {rate:.5f}")


if __name__ == "__main__":
    main()
