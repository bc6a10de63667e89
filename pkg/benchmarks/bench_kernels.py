"""Time the numba and numpy kernel backends on representative inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from ridgelab import kernels
from ridgelab.linkfn import LinkFunction


def cases():
    cubic = LinkFunction.cubic().kernel_args
    pw = LinkFunction.piecewise([(0, 0), (0.01, 0), (0.01, 0.1), (0.1, 0.1), (1, 1)]).kernel_args
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 200_000)
    y = np.geomspace(1e-3, 0.5, 2000)
    zs = np.linspace(0.1, 0.15, 400)
    xg = np.linspace(0.02, 0.03, 400)
    tab_x = np.linspace(0.1, 1.0, 4096)
    tab_f = np.linspace(0.03, 9.0, 4096)
    rec = np.array([1], dtype=np.int64)
    return {
        "link_eval cubic 2e5": lambda b: b.link_eval(*cubic, x),
        "link_eval piecewise 2e5": lambda b: b.link_eval(*pw, x),
        "gaht_inner_mins 2000x512": lambda b: b.gaht_inner_mins(*cubic, y, 1e-6, 512),
        "feasibility_search 400x400": lambda b: b.feasibility_search(*cubic, 0.002, 0.004, zs, xg),
        # exact stepping: 1e5 rounds with no target hit
        "integrate_rate lb 1e5 steps": lambda b: b.integrate_rate(0, *cubic, tab_x, tab_f, 1e-9, 1e-3, 10**5, 4.0, 0.0, rec),
        "integrate_rate ub leap d=1e3": lambda b: b.integrate_rate(1, *cubic, tab_x, tab_f, 1e-6, 1e-2, 10**12, 0.25, 1e-4, rec),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = [("numpy", kernels.numpy_backend)]
    if kernels.numba_backend is not None:
        backends.append(("numba", kernels.numba_backend))
    print(f"{'kernel':32s}" + "".join(f"{n:>12s}" for n, _ in backends) + "     speedup", flush=True)
    for name, fn in cases().items():
        times = []
        for _, b in backends:
            fn(b)  # warm-up (and JIT compile)
            times.append(min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)))
        row = f"{name:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:8.1f}x"
        print(row, flush=True)


if __name__ == "__main__":
    main()
