"""Timing of the exact W1 routes on empirical measures of cat-map orbits.

    python scripts/bench_w1.py --sizes 500 1000 2000 5000
"""

import argparse
import time

from shadowlab.systems import ToralAutomorphism
from shadowlab.transport import empirical_measure, mixture, w1


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000])
    args = parser.parse_args()
    f = ToralAutomorphism()
    print("n,route,w1,seconds")
    for n in args.sizes:
        mu = empirical_measure(f.orbit([0.1234, 0.5678], 0, n - 1), 0, n)
        nu = empirical_measure(f.orbit([0.4142, 0.2718], 0, n - 1), 0, n)
        for route in ("assignment", "network"):
            t0 = time.perf_counter()
            val = w1(mu, nu, max_atoms=n, route=route)
            print(f"{n},{route},{val:.12f},{time.perf_counter() - t0:.3f}")
        half = n // 2
        lam = empirical_measure(f.orbit([0.3, 0.9], 0, half - 1), 0, half)
        mix = mixture([nu, lam], [0.5, 0.5])
        t0 = time.perf_counter()
        val = w1(mu, mix, max_atoms=2 * n)
        print(f"{n},network-mixture,{val:.12f},{time.perf_counter() - t0:.3f}")


if __name__ == "__main__":
    main()
