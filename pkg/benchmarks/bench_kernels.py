"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sf 7] [--repeat 3]
"""

import argparse
import time

import numpy as np

from coherent_lora import _kernels_py

try:
    from coherent_lora import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def workloads(sf, rng):
    N = 2 ** sf
    scales = np.sqrt(10 ** (np.arange(-12.0, 0.0, 2.0) / 10) / N)
    v = rng.normal(0, 0.3 * N, (4096, 10))
    valid = np.ones(v.shape, dtype=np.uint8)
    proj = rng.normal(0, 0.1 * N, (256, N))
    eligible = np.ones(proj.shape, dtype=np.uint8)
    mu = rng.normal(0, 0.2 * N, (8, N))
    sigma = float(np.sqrt(N / (2 * 10 ** (-0.6))))
    return {
        "pairwise_q_sums": lambda k: k.pairwise_q_sums(v, valid, N, scales, np.zeros(scales.size)),
        "max_projection_sums": lambda k: k.max_projection_sums(proj, eligible, scales, np.zeros(scales.size)),
        "exact_error_probs": lambda k: k.exact_error_probs(mu, sigma, 10.0, 401, np.empty_like(mu)),
    }


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sf", type=int, default=7)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, run in workloads(args.sf, rng).items():
        t_py = best_time(lambda: run(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{name:<22}{t_py:>12.4f}{'n/a':>12}{'':>10}")
            continue
        t_c = best_time(lambda: run(_kernels_c), args.repeat)
        print(f"{name:<22}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
