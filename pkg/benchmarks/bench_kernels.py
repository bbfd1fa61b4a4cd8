"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, backend) with the best wall time and the
speed-up over the Python fallback.
"""
import argparse
import time

import numpy as np

from neighbourtext import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    lat_p = 51.5 + rng.uniform(-0.3, 0.3, 20_000)
    lon_p = rng.uniform(-0.4, 0.4, 20_000)
    lat_c = 51.5 + rng.uniform(-0.3, 0.3, 600)
    lon_c = rng.uniform(-0.4, 0.4, 600)

    X = rng.normal(size=(150, 500))
    X -= X.mean(axis=0)
    X /= X.std(axis=0)
    X = np.asfortranarray(X)
    y = X[:, :5] @ np.array([1.0, -0.5, 0.3, 0.2, 0.1]) + rng.normal(scale=0.5, size=150)
    y -= y.mean()

    def haversine(b):
        return lambda: b.haversine_matrix(lat_c[:300], lon_c[:300], lat_c, lon_c)

    def nearest(b):
        return lambda: b.nearest_within(lat_p, lon_p, lat_c, lon_c, 1.0, 1e-12)

    def cd(b):
        def run():
            theta = np.zeros(X.shape[1])
            trace = np.empty(10_000)
            b.cd_solve(X, y, 0.05, 0.05, 1e-7, 10_000, theta, trace)
        return run

    return {"haversine_matrix 300x600": haversine, "nearest_within 20000x600": nearest, "cd_solve 150x500": cd}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels are not built; only the Python fallback is available")
    rng = np.random.default_rng(0)
    for name, make in cases(rng).items():
        base = best_of(make(backends["python"]), args.repeat)
        for bname, b in sorted(backends.items()):
            t = base if bname == "python" else best_of(make(b), args.repeat)
            print(f"{name:28s} {bname:7s} {t * 1e3:9.2f} ms  x{base / t:6.1f}")


if __name__ == "__main__":
    main()
