"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 1024] [--steps 200] [--repeat 5]

Each kernel is first checked for bitwise agreement between the backends.
"""

import argparse
import timeit

import numpy as np

from hjadjoint._backend import get_backend


def cases(n, steps):
    rng = np.random.default_rng(0)
    x = np.arange(n) / n
    u = np.cos(2 * np.pi * x)
    h, m = 4 / n, 4
    dt = 0.4 * h / (2 * np.pi + 1)
    a = rng.uniform(0, 3, n)
    b = rng.uniform(0, 3, n)
    v = rng.standard_normal(n)
    xs = np.linspace(0, 1, 257)
    return {
        "upwind_euler_steps": (u, m, h, dt, steps),
        "crandall_lions_quadratic_euler_steps": (u, m, h, dt, 7.3, steps),
        "stencil_step": (v, a, b, m, h, 0.1 * h),
        "stencil_transpose_step": (v, a, b, m, h, 0.1 * h),
        "hopf_lax_scan_quadratic": (np.cos(2 * np.pi * np.arange(4 * n) / (4 * n)), xs, 0.5, 0.6),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    py = get_backend("python")
    try:
        cy = get_backend("compiled")
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1

    print(f"{'kernel':40s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s}  bitwise")
    for name, call in cases(args.n, args.steps).items():
        fp, fc = getattr(py, name), getattr(cy, name)
        same = np.array_equal(np.asarray(fp(*call)), np.asarray(fc(*call)), equal_nan=True)
        tp = min(timeit.repeat(lambda: fp(*call), number=1, repeat=args.repeat)) * 1e3
        tc = min(timeit.repeat(lambda: fc(*call), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:40s} {tp:12.3f} {tc:14.3f} {tp / tc:8.1f}  {'yes' if same else 'NO'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
