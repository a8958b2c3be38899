"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per (kernel, size, backend) with the best wall time of N runs.
"""

import argparse
import timeit

import numpy as np

from inputagg import _backend, linalg


def cases(rng):
    for d in (4, 16, 32, 64):
        A = rng.standard_normal((d, d))
        S = A + A.T
        yield "sym_eig", d, lambda k, S=S: linalg.sym_eig(S, kernels=k)
    for m, n in ((8, 16), (32, 64), (64, 128)):
        X = rng.standard_normal((m, n))
        yield "pinv", f"{m}x{n}", lambda k, X=X: linalg.pseudo_inverse(X, kernels=k)
    for d, q, t in ((16, 16, 1), (32, 16, 4), (64, 32, 2)):
        Y = rng.standard_normal((d, q))
        G = rng.standard_normal((t, d, d))
        yield "pool fwd", f"{d}x{q}/t{t}", lambda k, Y=Y, t=t: k.group_outer_pool(Y, t)
        yield "pool bwd", f"{d}x{q}/t{t}", lambda k, Y=Y, G=G, t=t: k.group_outer_pool_backward(G, Y, t)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = _backend.available()
    if len(backends) < 2:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<10} {'size':<12} " + " ".join(f"{b + ' (ms)':>14}" for b in backends)
          + ("   speedup" if len(backends) > 1 else ""))
    for name, size, fn in cases(rng):
        times = []
        for b in backends:
            k = _backend.load(b)
            number = 3
            times.append(min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number * 1e3)
        row = f"{name:<10} {str(size):<12} " + " ".join(f"{t:>14.3f}" for t in times)
        if len(times) > 1:
            row += f"   {times[1] / times[0]:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
