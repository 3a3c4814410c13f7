"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--n 10000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from mckean_ipm import kernels


def cases(n):
    keys = kernels.particle_keys(1, np.arange(n))
    rng = np.random.default_rng(0)
    S, shift = np.ones((1, 1)), np.zeros(1)
    ring1 = rng.normal(size=(n, 1, 1))
    ring26 = rng.normal(size=(n, 26, 1))
    A, B = rng.normal(size=(500, 26, 1)), rng.normal(size=(500, 26, 1))
    return {
        "normals (N x 1)": (lambda k: k.normals(keys, 7, 1), 1),
        "em_run, no delay, 20 steps": (
            lambda k: k.em_run_affine(ring1.copy(), 0, keys, 1, 20, 0.01, 1.0, 0.0, shift, S, 1.0, 0.0), 20),
        "em_run, 26-point window, 20 steps": (
            lambda k: k.em_run_affine(ring26.copy(), 0, keys, 1, 20, 0.01, 1.0, 0.3, shift, S, 1.0, 0.0), 20),
        "sup_cost 500 x 500 x 26": (lambda k: k.sup_cost(A, B, 2.0), 1),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"numpy": kernels.get_backend("numpy")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled core not built; timing numpy only")
    print(f"N = {args.n}, best of {args.repeat}; times per step (or per call) in microseconds")
    print(f"{'kernel':36s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, (fn, per) in cases(args.n).items():
        t = {}
        for b, mod in backends.items():
            fn(mod)
            t[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) / per * 1e6
        line = f"{name:36s}" + "".join(f"{t[b]:12.1f}" for b in backends)
        if len(backends) == 2:
            line += f"{t['numpy'] / t['cython']:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
