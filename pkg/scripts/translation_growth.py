"""Growth of ||tau_x phi||_p / ||phi||_p in |x| for a sweep of Sobolev orders.

    python scripts/translation_growth.py --N 64 --ps=-2,-1,0,1,2 --out growth.csv
"""
import argparse
import csv

from hermheat.sobolev import HermiteCoeffs, delta_coeffs
from hermheat.translation_heat import norm_bound_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--ps", default="-2,-1,0,1,2")
    ap.add_argument("--input", choices=["e0", "delta"], default="e0")
    ap.add_argument("--out", help="optional CSV of (p, radius, ratio)")
    args = ap.parse_args()

    phi = HermiteCoeffs.basis((0,), args.N) if args.input == "e0" else delta_coeffs([0.0], 1, args.N)
    rows = []
    print(f"{'p':>5} {'slope':>8} {'bound':>6}  verdict")
    for p in map(float, args.ps.split(",")):
        rep = norm_bound_scan(phi, p)
        print(f"{p:5g} {rep.slope:8.3f} {rep.degree + rep.slack:6g}  {'pass' if rep.passed else 'FAIL'}")
        rows += [{"p": p, "radius": r, "ratio": v} for r, v in zip(rep.radii, rep.ratios)]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["p", "radius", "ratio"])
            writer.writeheader()
            writer.writerows(rows)


if __name__ == "__main__":
    main()
