"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel with the best-of-N wall time of each backend
and the speed-up. Exits quietly with a note if the extension is missing.
"""

import argparse
import timeit

import numpy as np

from pitrecal import _accel


def cases():
    rng = np.random.default_rng(0)
    w = rng.dirichlet(np.ones(127))
    mu = rng.normal(0, 1, 127)
    sd = np.full(127, 0.1)
    x = np.linspace(-3, 3, 2000)
    q = np.linspace(0.001, 0.999, 200)
    states = rng.normal(0, 0.5, (127 * 64, 3))
    a = rng.normal(size=(512, 512))
    C = 1e-3 * (a + a.T)
    h = rng.normal(size=512)
    return {
        "ms_trajectory (20k steps)": lambda m: m.ms_trajectory(0.1, 0.0, 0.0, 10.0, 3.6, 0.01, 20000),
        "ms_ensemble (8128 x 8 steps)": lambda m: m.ms_ensemble(states, 10.5, 3.6, 0.01, 8),
        "mixture_cdf (127 comp x 2000)": lambda m: m.mixture_cdf(w, mu, sd, x),
        "mixture_pdf (127 comp x 2000)": lambda m: m.mixture_pdf(w, mu, sd, x),
        "mixture_quantile (200 levels)": lambda m: m.mixture_quantile(w, mu, sd, q, 1e-13),
        "var_quadrature (512 x 512)": lambda m: m.var_quadrature(h, C),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = _accel.backends()
    if "compiled" not in impls:
        print("compiled extension not built; nothing to compare")
        return
    print(f"{'kernel':32s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speed-up':>9s}")
    for name, fn in cases().items():
        t = {}
        for backend in ("python", "compiled"):
            mod = impls[backend]
            t[backend] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:32s} {t['python']:12.2f} {t['compiled']:14.2f} {t['python'] / t['compiled']:8.1f}x")


if __name__ == "__main__":
    main()
