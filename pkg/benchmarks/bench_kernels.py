"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--levels 16] [--steps 100000]

Each kernel is run once to trigger compilation, then timed ``--repeat`` times;
the table shows the best wall time per backend and the speed-up.
"""

import argparse
import time

import numpy as np

from srl import _accel, kernels


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(args):
    rng = np.random.default_rng(0)
    pair = rng.uniform(-1, 1, size=(2, 2, 2))
    triple3 = rng.uniform(-1, 1, size=(3, 3, 3))
    orbit = rng.normal(size=(args.steps, 2, 2))
    starts = np.arange(0, args.steps - 64, 7)
    return [
        (f"enumerate_words 2x2, k=2, n={args.levels}", lambda b: kernels.enumerate_words(pair, args.levels, backend=b)),
        ("enumerate_words 3x3, k=3, n=9", lambda b: kernels.enumerate_words(triple3, 9, backend=b)),
        (f"prefix_products {args.steps} steps", lambda b: kernels.prefix_products(orbit, 32, backend=b)),
        (f"window_products {starts.size} x 64", lambda b: kernels.window_products(orbit, starts, 64, backend=b)),
        (f"qr_exponents {args.steps} steps", lambda b: kernels.qr_exponents(orbit, backend=b)),
        (f"stack_norm_rho {args.steps} 2x2", lambda b: kernels.stack_norm_rho(orbit, backend=b)),
    ]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--levels", type=int, default=16)
    p.add_argument("--steps", type=int, default=100_000)
    args = p.parse_args()
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    if len(backends) == 1:
        print("numba unavailable (or SRL_DISABLE_NUMBA set); timing numpy only")
    print(f"{'kernel':40s}" + "".join(f"{b:>12s}" for b in backends) + ("     speed-up" if len(backends) == 2 else ""))
    for name, fn in cases(args):
        t = [best_of(lambda: fn(b), args.repeat) for b in backends]
        row = f"{name:40s}" + "".join(f"{x * 1e3:10.2f}ms" for x in t)
        if len(t) == 2:
            row += f"{t[0] / t[1]:12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
