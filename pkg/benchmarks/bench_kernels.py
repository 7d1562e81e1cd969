"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same inputs under both backends; the table lists
the best wall time of ``--repeat`` runs and the speedup.  Outputs are
compared so that a fast but wrong kernel shows up here as well.
"""

import argparse
import timeit

import numpy as np

from nsframe import _kernels
from nsframe.windows import WindowSpec


def cases(rng):
    a = WindowSpec.raised_cosine_band(0.02).leaf()
    b = WindowSpec.hann(0.0, 0.5).leaf()
    t = np.linspace(-40.0, 40.0, 2000)
    yield "conv_simpson_leaves (2000 pts)", "conv_simpson_leaves", (t, a, b, -1.0, 1.0, 1e-10)

    W = np.abs(rng.standard_normal((24, 20000)))
    shifts = rng.integers(-5000, 5000, size=(24, 64))
    yield "shifted_product_sums (24x20000, 64 l)", "shifted_product_sums", (W, shifts, rng.random(24))

    L, K = 4096, 32
    M = np.full(K, 256, dtype=np.int64)
    g = rng.standard_normal((K, L))
    f = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    yield "walnut_apply (L=4096, K=32)", "walnut_apply", (g, g, M, f)


def _first(x):
    return x[0] if isinstance(x, tuple) else x


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    backends = _kernels.backends()
    if "cython" not in backends:
        print("compiled extension not available; only the numpy fallback can be timed")
    rng = np.random.default_rng(0)
    names = sorted(backends, reverse=True)
    print(f"{'kernel':<40}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}  agree")
    for label, fn, call_args in cases(rng):
        times, outs = {}, {}
        for n in names:
            f = getattr(backends[n], fn)
            outs[n] = _first(f(*call_args))
            times[n] = min(timeit.repeat(lambda: f(*call_args), number=1, repeat=args.repeat))
        ref = outs["python"]
        agree = all(np.allclose(o, ref, rtol=1e-10, atol=1e-12) for o in outs.values())
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<40}" + "".join(f"{times[n] * 1e3:>10.1f}ms" for n in names)
              + f"{speed:>9.1f}x  {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
