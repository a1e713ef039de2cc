"""Benchmark the JIT-compiled kernels against the pure-numpy fallback.

Both entry points always exist: the undecorated kernel function is the
fallback, and the module-level jitted alias is either the compiled
version or the same function when JIT is disabled (LOBKIT_DISABLE_NUMBA).

Run:  python3 benchmarks/benchmark_accel.py
"""

import time

import numpy as np

from lobkit.accel import NUMBA_ENABLED
from lobkit.macro import _macro_core, _macro_core_jit
from lobkit.micro import _micro_core, _micro_core_jit


def _time(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_macro():
    L = 49
    x = np.arange(1, 50) / 50
    f = 2.0 * (1 - x)
    args = (f / 1.0, f / 1.0,                       # initial fields
            f, np.full(L, -1.0), np.full(L, 0.5), np.zeros(L),
            f, np.full(L, -1.0), np.full(L, 0.5), np.zeros(L),
            0.01, 0.01,
            60.0, 50, 100_000, 2720.0, 12.76, 0.02,
            1, True, 42, 20_000)
    if NUMBA_ENABLED:
        _macro_core_jit(*args)                      # compile outside timing
    t_jit, res_jit = _time(_macro_core_jit, *args)
    t_py, res_py = _time(_macro_core, *args)
    same = res_jit[3].shape == res_py[3].shape \
        and np.array_equal(res_jit[3], res_py[3])
    print(f"macro scheme kernel (100k steps, N=50):")
    print(f"  fallback: {t_py:.3f} s   jit: {t_jit:.3f} s   "
          f"speedup: {t_py / t_jit:.1f}x   identical jump log: {same}")


def bench_micro():
    L = 9
    bid = np.full(L, 30, dtype=np.int64)
    tab = np.full((2, L), 0.5)
    zeros = np.zeros((2, L))
    args = (bid, bid.copy(), tab, zeros, 0.3 * np.ones((2, L)), zeros,
            0.1 * np.ones((2, L)), zeros, 0.5, 0.5,
            1000.0, 100.0, 2.0, 0.1, 10, 1, True, 20_000.0, 7,
            False, np.empty(0), 100_000_000, True)
    if NUMBA_ENABLED:
        _micro_core_jit(*args)
    t_jit, res_jit = _time(_micro_core_jit, *args)
    t_py, res_py = _time(_micro_core, *args)
    same = res_jit[14] == res_py[14]
    print(f"micro event kernel (n=1000, horizon 20k, N=10):")
    print(f"  fallback: {t_py:.3f} s   jit: {t_jit:.3f} s   "
          f"speedup: {t_py / t_jit:.1f}x   identical event count: {same}")


if __name__ == "__main__":
    print(f"numba enabled: {NUMBA_ENABLED}")
    if not NUMBA_ENABLED:
        print("(set LOBKIT_DISABLE_NUMBA=0 or unset it to benchmark the "
              "compiled path; both timings below use the fallback)")
    bench_macro()
    bench_micro()
