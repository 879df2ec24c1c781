"""Compare the compiled Gaussian inversion kernels with the numpy twin.

Run ``python benchmarks/bench_kernels.py``.  For several array sizes it
prints the best-of-``repeat`` time per call for each backend, then the
largest disagreement between the two on the biggest array.
"""
import argparse
import timeit

import numpy as np

from gausslike import _kernels_py as pure

try:
    from gausslike import _kernels as compiled
except ImportError:
    compiled = None


def sample(rng, size):
    # log-uniform probabilities from 1e-300 to 1/2; a third reflected above 1/2
    p = np.exp(-rng.uniform(np.log(2.0), 690.0, size))
    p[::3] = 1.0 - np.exp(-rng.uniform(np.log(2.0), 30.0, p[::3].size))
    return p


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[1, 64, 100_000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = {"numpy": pure}
    if compiled is not None:
        backends["cython"] = compiled
    else:
        print("compiled kernels not built; timing the numpy twin only")
    print(f"{'backend':7s} {'kernel':9s} {'size':>7s} {'us/call':>10s}")
    last = {}
    for size in args.sizes:
        p = sample(rng, size)
        number = max(1, 20_000 // size)
        for name, mod in backends.items():
            for fn in ("cdf_inv", "tail_inv"):
                f = getattr(mod, fn)
                t = min(timeit.repeat(lambda: f(p, 1e-14, 200), number=number, repeat=args.repeat)) / number
                last[name, fn] = f(p, 1e-14, 200)[0]
                print(f"{name:7s} {fn:9s} {size:7d} {t * 1e6:10.1f}")
    if compiled is not None:
        for fn in ("cdf_inv", "tail_inv"):
            a, b = last["numpy", fn], last["cython", fn]
            rel = np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))
            print(f"max relative disagreement {fn}: {rel:.2e}")


if __name__ == "__main__":
    main()
