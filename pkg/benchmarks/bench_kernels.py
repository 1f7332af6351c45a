"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [n]
"""
import sys
import time

import numpy as np

from active_scalar_lab import kernels
from active_scalar_lab.moduli import BurgersCritical
from active_scalar_lab.spectral import Field, PeriodicGrid, derivative


def best_of(fn, repeat=5):
    fn()  # warm-up, includes jit compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(n=4096):
    g = PeriodicGrid(1, n)
    th = Field.from_function(g, lambda x: np.sin(x) + 0.3 * np.cos(3 * x))
    w = BurgersCritical(50.0).scaled(2.0)
    inv_w = 1.0 / w.eval(np.arange(1, n // 2 + 1) * g.spacing)
    vals = np.ascontiguousarray(th.values)
    f, d1, d2 = th.values, derivative(th).values, derivative(th, order=2).values
    tau = 0.5 / float(np.max(np.abs(d1)))
    feet = (g.x, g.x[0], g.spacing, f, d1, d2, tau)

    rows = [
        ("obedience_1d", lambda: kernels.obedience_1d_numpy(vals, inv_w),
         lambda: kernels.obedience_1d_numba(vals, inv_w)),
        ("characteristic_feet", lambda: kernels.characteristic_feet_numpy(*feet),
         lambda: kernels.characteristic_feet_numba(*feet)),
    ]
    print(f"n = {n}")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name, slow, fast in rows:
        a, b = best_of(slow), best_of(fast)
        print(f"{name:<22}{1e3 * a:>12.3f}{1e3 * b:>12.3f}{a / b:>10.1f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 4096)
