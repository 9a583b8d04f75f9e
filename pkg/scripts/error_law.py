"""Table of fitted error-law exponents |oracle - expansion| ~ D^slope."""
import argparse

from elliptika import asymp


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--Ds", default="8,16,32,64,128")
    args = ap.parse_args()
    Ds = [float(d) for d in args.Ds.split(",")]
    print(f"{'case':20s} {'M':>2s} {'C^2D':>5s} {'slope':>8s} {'target':>7s}")
    for kind in asymp.ERROR_LAW_CASES:
        for M in (0, 1, 2):
            for c2d in (0.1, 1.0):
                r = asymp.error_law(kind, M, c2d, Ds)
                print(f"{kind:20s} {M:2d} {c2d:5.1f} {r.slope:8.3f} {r.target:7.2f}")


if __name__ == "__main__":
    main()
