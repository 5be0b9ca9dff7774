"""Compare the compiled and pure-Python spline kernels.

Times the three rational-quadratic spline kernels on random knot tables and
one epoch of flow training with each backend.

    python3 benchmarks/bench_kernels.py [--sizes 1000 10000 100000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from levy_extract import kernels
from levy_extract.flows import TrainConfig, build_spline_flow, train
from levy_extract.flows.transforms import spline_knots


def _tables(rng, n, k=5, bound=3.0):
    raw = rng.normal(size=(n, 3 * k - 1))
    xk, yk, dk, _ = spline_knots(raw[:, :k], raw[:, k:2 * k], raw[:, 2 * k:], bound)
    return xk, yk, dk


def bench_kernels(impl, n, repeat):
    rng = np.random.default_rng(0)
    xk, yk, dk = _tables(rng, n)
    x = rng.uniform(-4, 4, n)
    y, _ = impl.rqs_forward(x, xk, yk, dk)
    gy, gl = rng.normal(size=n), rng.normal(size=n)
    calls = {
        "forward": lambda: impl.rqs_forward(x, xk, yk, dk),
        "inverse": lambda: impl.rqs_inverse(y, xk, yk, dk),
        "backward": lambda: impl.rqs_backward(x, xk, yk, dk, gy, gl),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in calls.items()}


def bench_training(backend, repeat):
    data = np.random.default_rng(1).normal(size=(4000, 1))
    previous = kernels.use_backend(backend)
    try:
        def run():
            train(build_spline_flow(dim=1, seed=0), data, TrainConfig(epochs=1))
        return min(timeit.repeat(run, number=1, repeat=repeat))
    finally:
        kernels.use_backend(previous)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"available backends: {', '.join(backends)} (default: {kernels.BACKEND})")
    if "cython" not in backends:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'n':>8} {'kernel':>9} " + " ".join(f"{b + ' ms':>12}" for b in backends)
          + ("    speedup" if len(backends) > 1 else ""))
    for n in args.sizes:
        timings = {b: bench_kernels(kernels.get_backend(b), n, args.repeat) for b in backends}
        for name in ("forward", "inverse", "backward"):
            cells = " ".join(f"{1e3 * timings[b][name]:12.3f}" for b in backends)
            extra = ""
            if len(backends) > 1:
                extra = f"{timings['python'][name] / timings['cython'][name]:10.1f}x"
            print(f"{n:>8} {name:>9} {cells} {extra}")
    epoch = {b: bench_training(b, args.repeat) for b in backends}
    cells = " ".join(f"{1e3 * epoch[b]:12.1f}" for b in backends)
    extra = f"{epoch['python'] / epoch['cython']:10.1f}x" if len(backends) > 1 else ""
    print(f"{'4000':>8} {'epoch':>9} {cells} {extra}")


if __name__ == "__main__":
    main()
