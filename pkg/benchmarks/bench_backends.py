"""Time the compiled core against the numpy fallback.

Usage: python benchmarks/bench_backends.py [--sizes 16,32,64] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from kae import _backend


def bench(fn, repeat):
    fn()  # warm up
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="16,32,64", help="comma-separated sample counts n")
    p.add_argument("--dim", type=int, default=3, help="layer dimension")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if _backend.NAME != "cython":
        print("compiled core not available; only the fallback can be timed")
    backends = ["python"] + (["cython"] if _backend.NAME == "cython" else [])
    rng = np.random.default_rng(0)
    d = args.dim
    print(f"threads={_backend.threads()}")
    print(f"{'op':<14}{'n':>6}" + "".join(f"{b:>12}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for n in (int(v) for v in args.sizes.split(",")):
        J = rng.standard_normal((n, d, n, d))
        G = rng.standard_normal((n, n, d))
        phi = rng.standard_normal((n, d))
        a = np.ones(d)
        X = rng.standard_normal((4 * n, 8))
        cases = {
            "jacobian_step": lambda b: _backend.jacobian_step(J, G, phi, a, backend=b),
            "sq_dists": lambda b: _backend.sq_dists(X, X, backend=b),
        }
        for name, call in cases.items():
            times = [bench(lambda b=b: call(b), args.repeat) for b in backends]
            row = f"{name:<14}{n:>6}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
            if len(times) == 2:
                row += f"   {times[0] / times[1]:7.2f}x"
            print(row)


if __name__ == "__main__":
    main()
