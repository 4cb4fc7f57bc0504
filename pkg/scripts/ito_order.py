"""Terminal Ito residual under step halving; prints the h-halving table."""
import argparse

from hermheat.sobolev import HermiteCoeffs
from hermheat.stochastic import ito_convergence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=24)
    ap.add_argument("--halvings", type=int, default=8)
    ap.add_argument("--paths", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--drift", type=float, default=None)
    ap.add_argument("--sign", type=int, choices=[-1, 1], default=-1,
                    help="-1: tau_X phi with the translate formula; +1: tau_-X phi with the SDE form")
    args = ap.parse_args()

    rep = ito_convergence(HermiteCoeffs.basis((0,), args.N), halvings=args.halvings, paths=args.paths,
                          seed=args.seed, sign=args.sign,
                          drift=None if args.drift is None else [args.drift])
    print(f"{'h':>12} {'rms residual':>14} {'local order':>12}")
    for row in rep.table():
        local = "" if row["order_estimate"] is None else f"{row['order_estimate']:.3f}"
        print(f"{row['h']:12.3e} {row['terminal_rms']:14.4e} {local:>12}")
    print(f"fitted order {rep.order:.3f}")


if __name__ == "__main__":
    main()
