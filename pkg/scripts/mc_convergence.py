"""Monte Carlo error of E tau_{X_t} phi against the spectral heat solution as M grows."""
import argparse
import time

import numpy as np

from hermheat.sobolev import HermiteCoeffs, delta_coeffs, sobolev_norm
from hermheat.stochastic import mc_expectation
from hermheat.translation_heat import heat_apply


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=48)
    ap.add_argument("-t", type=float, default=0.5)
    ap.add_argument("-p", type=float, default=0.0, help="norm order for the error")
    ap.add_argument("--input", choices=["e0", "delta"], default="e0")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--max-log2-M", type=int, default=17)
    args = ap.parse_args()

    phi = HermiteCoeffs.basis((0,), args.N) if args.input == "e0" else delta_coeffs([0.0], 1, args.N)
    exact = heat_apply(phi, args.t)
    print(f"{'M':>8} {'error':>10} {'agg SE':>10} {'err/SE':>7} {'sec':>6}")
    for k in range(10, args.max_log2_M + 1):
        M = 2 ** k
        t0 = time.perf_counter()
        est = mc_expectation(phi, args.t, M, args.seed, workers=args.workers)
        err = sobolev_norm(est.mean - exact, args.p)
        se = est.aggregate_se(args.p)
        print(f"{M:8d} {err:10.3e} {se:10.3e} {err / se:7.2f} {time.perf_counter() - t0:6.2f}")
    print(f"expected SE decay per doubling: {np.sqrt(2):.3f}")


if __name__ == "__main__":
    main()
