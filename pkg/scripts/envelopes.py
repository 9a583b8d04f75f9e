"""Oracle Fourier factors against the small- and large-region envelopes."""
import argparse
import math

from elliptika import elliptic as el


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p-small", type=int, default=1_000_003)
    ap.add_argument("--p-large", type=int, default=101)
    ap.add_argument("--N", type=int, default=2)
    args = ap.parse_args()
    theta = el.make_theta()
    rp = math.sqrt(args.p_small)
    for lmax, ximax in ((3, 3), (6, 6), (12, 12)):
        grid = [(l, f, xi) for l in range(1, lmax + 1) for f in (1, 2, 3)
                for xi in range(1, ximax + 1) if l * f * f * xi / rp <= 0.1]
        rep = el.envelope_check(args.p_small, theta, grid, "small")
        print("small", len(grid), {k: f"{v:.3g}" for k, v in sorted(rep.max_ratio.items())})
    rp = math.sqrt(args.p_large)
    for step in (50, 25, 10):
        grid = [(l, f, xi) for l in range(110, 230, step) for f in (1, 2) for xi in (1, 2, 3, 4)
                if l * f * f * xi / rp >= 10]
        rep = el.envelope_check(args.p_large, theta, grid, "large", args.N)
        print("large", len(grid), {k: f"{v:.3g}" for k, v in sorted(rep.max_ratio.items())})


if __name__ == "__main__":
    main()
