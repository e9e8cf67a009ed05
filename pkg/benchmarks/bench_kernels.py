"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import math
import timeit

import numpy as np

from pathparse import kernels


def cases():
    rng = np.random.default_rng(0)

    theta = rng.integers(0, 4, 10) * np.pi / 2
    c, s = np.cos(theta), np.sin(theta)
    C, D = math.fsum(c), math.fsum(s)
    yield "scan_partitions n=10", "scan_partitions", (c, s, C, D, 1e-8, False)

    theta = rng.integers(0, 6, 200) * np.pi / 3
    c, s = np.cos(theta), np.sin(theta)
    C, D = math.fsum(c), math.fsum(s)
    u = rng.random((20000, 4))
    labels = np.zeros(200, dtype=np.int64)
    yield "anneal n=200, 20000 moves", "anneal", (
        c, s, np.arctan2(s, c), C, D, labels, u, 1.0, 0.9995, 2e-7, 0.05, False,
    )

    theta = rng.uniform(0, 2 * np.pi, 2000)
    yield "direct_pair_sum n=2000", "direct_pair_sum", (theta,)

    theta = rng.uniform(0, 2 * np.pi, 200000)
    yield "phase_sums n=200000", "phase_sums", (np.cos(theta), np.sin(theta))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"{'kernel':<28}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for label, fn, argv in cases():
        times = {}
        for name in names:
            f = getattr(backends[name], fn)
            times[name] = min(timeit.repeat(lambda: f(*argv), number=1, repeat=args.repeat))
        row = f"{label:<28}" + "".join(f"{times[n]:>11.4f}s" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
