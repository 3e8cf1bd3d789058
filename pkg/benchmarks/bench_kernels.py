"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from hindsight import _kernels_py

try:
    from hindsight import _kernels as compiled
except ImportError:  # extension not built
    compiled = None
from hindsight.linalg import MAX_ITER, RESID_TOL, VALUE_TOL


def cases(seed=0):
    gen = np.random.default_rng(seed)
    d = np.abs(gen.standard_normal((300, 8)))
    d[d < 0.5] = 0.0
    m = gen.uniform(0.1, 1.0, (8, 8))
    m = m + m.T
    ms = gen.uniform(0.1, 1.0, (3000, 3, 3))
    return {
        "outer_product_sum": lambda mod: mod.outer_product_sum(d),
        "power_iteration": lambda mod: mod.power_iteration(m, VALUE_TOL, RESID_TOL, MAX_ITER),
        "batched_power_iteration": lambda mod: mod.batched_power_iteration(ms, VALUE_TOL, RESID_TOL, MAX_ITER),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if compiled is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<26}{'python (ms)':>14}{'compiled (ms)':>16}{'speedup':>10}")
    for name, run in cases().items():
        t_py = min(timeit.repeat(lambda: run(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<26}{t_py:>14.3f}{'-':>16}{'-':>10}")
            continue
        t_c = min(timeit.repeat(lambda: run(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26}{t_py:>14.3f}{t_c:>16.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
