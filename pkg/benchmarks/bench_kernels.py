"""Benchmark the compiled MLP kernel against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [repeats]
"""
import sys
import time

import numpy as np

from bsamlab.kernels import python_backend

try:
    from bsamlab.kernels import _speedups
except ImportError:
    _speedups = None

CASES = [
    ("tiny   [2,16,2]      n=32", [2, 16, 2], 32),
    ("small  [2,32,32,2]   n=64", [2, 32, 32, 2], 64),
    ("medium [16,64,64,4]  n=128", [16, 64, 64, 4], 128),
    ("large  [64,128,128,8] n=256", [64, 128, 128, 8], 256),
]


def bench(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 50
    backends = [("python", python_backend)]
    if _speedups is not None:
        backends.append(("cython", _speedups))
    else:
        print("compiled backend not built; benchmarking numpy fallback only")

    print(f"{'case':<30} {'op':<10}", *(f"{n:>12}" for n, _ in backends),
          "speedup" if len(backends) == 2 else "")
    for label, layers, n in CASES:
        rng = np.random.default_rng(0)
        w = rng.standard_normal(python_backend.param_count(layers))
        x = rng.standard_normal((n, layers[0]))
        y = rng.integers(0, layers[-1], n)
        for op, call in [("loss", lambda b: b.mlp_loss(w, layers, x, y)),
                         ("loss+grad", lambda b: b.mlp_loss_grad(w, layers, x, y))]:
            times = [bench(lambda b=b: call(b), repeats) for _, b in backends]
            cols = "".join(f"{t * 1e6:>10.1f}us" for t in times)
            ratio = f"  {times[0] / times[1]:>5.2f}x" if len(times) == 2 else ""
            print(f"{label:<30} {op:<10}{cols}{ratio}")

    # agreement check on the largest case
    if _speedups is not None:
        lp, gp = python_backend.mlp_loss_grad(w, layers, x, y)
        lc, gc = _speedups.mlp_loss_grad(w, layers, x, y)
        print(f"\nmax |grad diff| = {np.max(np.abs(gp - gc)):.3e}, "
              f"|loss diff| = {abs(lp - lc):.3e}")


if __name__ == "__main__":
    main()
