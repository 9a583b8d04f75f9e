"""Truncated Sigma(xi != 0) against the xi-complete (Poisson dual) reference
for a few truncation policies, with the doubling-audit deltas."""
import argparse
import time

from elliptika import elliptic as el


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--primes", default="101,401")
    args = ap.parse_args()
    theta = el.make_theta()
    policies = {
        "lf2<=8rp, xi<=8rp/lf2": el.TruncationPolicy(lf2_ratio=8, xi_ratio=8, d_max=0, xi_floor=8),
        "default": el.TruncationPolicy(),
    }
    for p in (int(q) for q in args.primes.split(",")):
        for name, pol in policies.items():
            t0 = time.perf_counter()
            r = el.sigma_xi(p, theta, pol)
            print(f"p={p:5d} {name:24s} sigma={r.sigma_xi:+.6e} dual={r.xi_complete:+.6e} "
                  f"rel={abs(r.sigma_xi - r.xi_complete) / abs(r.xi_complete):.1e} "
                  f"audit={ {k: f'{v:.1e}' for k, v in r.truncation_audit.items()} } "
                  f"{time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
