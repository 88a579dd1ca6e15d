"""Timing comparison of the two kernel backends.

Runs the hot analytics kernels (pair energy contributions, min/max bucket
downsampling) on synthetic 1 Hz logs through both the numba and the numpy
implementations, prints per-sample costs and the speedup, and double-checks
that the outputs stay bitwise identical while doing so.

Usage: python benchmarks/bench_kernels.py [--sizes 86400,604800] [--repeats 7]
"""
import argparse
import time

import numpy as np

from plugmeter.analytics import kernels_numpy

try:
    from plugmeter.analytics import kernels_numba
except ImportError:
    kernels_numba = None


def make_log(n: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A day-in-the-life series: 1 Hz timestamps, sine + noise power, sparse gaps."""
    rng = np.random.default_rng(seed)
    ts = 1_755_300_000_000 + np.arange(n, dtype=np.int64) * 1000
    ts += rng.integers(-40, 40, n)  # scheduler jitter
    ts.sort()
    t = np.arange(n, dtype=np.float64)
    power = 80.0 + 20.0 * np.sin(2 * np.pi * t / 60.0) + rng.normal(0.0, 1.5, n)
    np.clip(power, 0.0, None, out=power)
    gaps = rng.random(n) < 0.001
    return ts, power, gaps


def best_of(repeats: int, fn, *args) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="86400,604800",
                        help="comma-separated sample counts (default: one day, one week at 1 Hz)")
    parser.add_argument("--repeats", type=int, default=7, help="timing repeats, best is kept")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s]

    if kernels_numba is None:
        print("numba is not importable; timing the numpy backend only")
    else:
        # first call pays the JIT compile; keep it out of the timings
        ts, power, gaps = make_log(1000, seed=0)
        kernels_numba.pair_contributions_ws(ts, power, gaps)
        kernels_numba.downsample_mask(ts, power, 100)

    header = f"{'kernel':<22}{'n':>9}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        ts, power, gaps = make_log(n, seed=1)
        cases = [
            ("pair_contributions_ws", lambda mod: mod.pair_contributions_ws(ts, power, gaps)),
            ("downsample_mask", lambda mod: mod.downsample_mask(ts, power, 2000)),
        ]
        for name, call in cases:
            t_np = best_of(args.repeats, call, kernels_numpy)
            if kernels_numba is None:
                print(f"{name:<22}{n:>9}  {t_np * 1e3:>8.2f}ms  {'-':>10}  {'-':>8}")
                continue
            t_nb = best_of(args.repeats, call, kernels_numba)
            a, b = call(kernels_numpy), call(kernels_numba)
            pair_a = a if isinstance(a, tuple) else (a,)
            pair_b = b if isinstance(b, tuple) else (b,)
            for left, right in zip(pair_a, pair_b):
                assert left.tobytes() == right.tobytes(), f"{name}: backends diverged"
            print(f"{name:<22}{n:>9}  {t_np * 1e3:>8.2f}ms  {t_nb * 1e3:>8.2f}ms  {t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
