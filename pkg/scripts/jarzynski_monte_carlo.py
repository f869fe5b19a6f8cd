"""Sampled two-point-measurement work against the exact distribution, for the spin or a random d-level system."""

import argparse
import math

import numpy as np

from tpmwb.sampler import RngState, empirical_violation_rate, run_batch
from tpmwb.spinsys import ResonanceParams, frame_params
from tpmwb.tpm import random_setup, spin_setup, work_distribution_general


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim", type=int, default=0, help="0 for the driven spin, else a random d-level setup")
    ap.add_argument("--parts", type=int, default=1)
    args = ap.parse_args()

    if args.dim:
        s = random_setup(np.random.default_rng(args.seed), args.dim)
    else:
        p = ResonanceParams.from_f(1.0, 0.1, 0.8, 0.5)
        s = spin_setup(p, math.pi / frame_params(p).omega_rabi)
    exact = work_distribution_general(s)
    st = run_batch(s, args.samples, RngState(args.seed), parts=args.parts)
    target = math.exp(-s.beta * s.delta_f())

    print(f"{'w':>12} {'exact':>10} {'sampled':>10} {'z':>7}")
    for w, q in exact.atoms:
        freq = st.histogram.prob_at(w)
        sd = math.sqrt(q * (1 - q) / st.count) if 0 < q < 1 else float("nan")
        print(f"{w:12.6f} {q:10.6f} {freq:10.6f} {(freq - q) / sd:7.2f}")
    print(f"\n<exp(-beta W)> = {st.jarzynski_estimate:.6f} +- {st.standard_error_jarzynski:.6f}"
          f"  (exact exp(-beta dF) = {target:.6f})")
    print(f"<W> = {st.mean_work:.6f} +- {st.standard_error_mean:.6f}, dF = {s.delta_f():.6f}")
    print(f"fraction with W < dF: {empirical_violation_rate(st, s.delta_f()):.6f}")


if __name__ == "__main__":
    main()
