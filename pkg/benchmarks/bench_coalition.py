"""Time the coalition-game kernel on both backends over identical instances.

    python benchmarks/bench_coalition.py [--instances 200] [--kse 10] [--subchannels 20]

Fails with exit status 1 if the backends disagree on any instance.
"""

import argparse
import sys
import time

import numpy as np

from fedalloc import kernels
from fedalloc.allocation import coalition_game
from fedalloc.radio import LinkBudget, rate_table, sample_topology


def instances(n, kse, S, K=100):
    out = []
    for seed in range(n):
        rng = np.random.default_rng(seed)
        tab = rate_table(sample_topology(rng, K), LinkBudget(), S, 1, rng)
        sel = sorted(rng.choice(K, kse, replace=False).tolist())
        out.append((seed, tab, sel))
    return out


def run(backend, cases):
    start = time.perf_counter()
    res = [coalition_game(tab, sel, 1e6, np.random.default_rng(seed), backend=backend)
           for seed, tab, sel in cases]
    return time.perf_counter() - start, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--kse", type=int, default=10)
    ap.add_argument("--subchannels", type=int, default=20)
    args = ap.parse_args(argv)

    cases = instances(args.instances, args.kse, args.subchannels)
    times, results = {}, {}
    for name in kernels.BACKENDS:
        run(name, cases[:5])  # warm-up
        times[name], results[name] = run(name, cases)
        print(f"{name:>7}: {times[name]:8.3f} s  ({1e3 * times[name] / len(cases):.2f} ms/instance)")

    if "cython" not in times:
        print("compiled backend not built; only the pure-Python fallback was timed")
        return 0
    print(f"speed-up: {times['python'] / times['cython']:.1f}x")
    if results["python"] != results["cython"]:
        print("MISMATCH: backends disagree", file=sys.stderr)
        return 1
    print(f"parity: identical outcomes on {len(cases)} instances")
    return 0


if __name__ == "__main__":
    sys.exit(main())
