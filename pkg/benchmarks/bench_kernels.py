"""Time the hot kernels under both backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each backend runs in a fresh interpreter (the backend flag is read at import),
the first call is discarded as warm-up (JIT compilation), and the best of
``--repeat`` timings is reported.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

WORKER = "--worker"


def _best(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def worker(repeat):
    import ncvaic
    from ncvaic import _kernels as K
    from ncvaic import BERNOULLI, Dataset, PenaltySpec, estimate_K, fit

    rng = np.random.default_rng(0)
    n, p = 2000, 20
    X = rng.uniform(-1, 1, size=(n, p))
    XT = np.ascontiguousarray(X.T)
    w = rng.uniform(0.2, 1.0, size=n)
    z = X[:, :3] @ np.array([1.0, -0.5, 0.8]) + rng.standard_normal(n)
    c = XT ** 2 @ w
    mask = np.ones(p, dtype=np.bool_)

    def cd():
        K.cd_weighted(XT, w, z.copy(), np.zeros(p), c, K.SCAD, 0.05, 3.7, float(n), mask,
                      1000, 1e-11)

    A = rng.standard_normal((8, 8))
    Q = A @ A.T / 8 + 0.1 * np.eye(8)
    B = rng.standard_normal((5000, 8))

    def quad():
        K.quad_l1_cd_batch(Q, B, 0.5, 100_000, 1e-12)

    beta = np.array([1.5, 0.0, 0.0, -1.0, 0.0, 0.0])
    Xf = rng.uniform(-1, 1, size=(500, 6))
    yf = (rng.random(500) < 1 / (1 + np.exp(-Xf @ beta))).astype(float)
    data = Dataset(yf, Xf)

    def full_fit():
        fit(data, BERNOULLI, PenaltySpec("mcp", 1.0, 1.0))

    J = Xf.T @ Xf / 500

    def k_hat():
        estimate_K(J, (0, 3), 1.0, 10_000, 1)

    out = {"backend": ncvaic.BACKEND}
    for name, fn in (("cd_weighted n=2000 p=20", cd), ("quad_l1 batch 5000 x m=8", quad),
                     ("fit bernoulli n=500 p=6", full_fit), ("estimate_K 10k draws", k_hat)):
        out[name] = _best(fn, repeat)
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument(WORKER, action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat)
        return
    results = []
    for disable in ("0", "1"):
        env = dict(os.environ, NCVAIC_DISABLE_NUMBA=disable)
        proc = subprocess.run([sys.executable, __file__, WORKER, "--repeat", str(args.repeat)],
                              env=env, capture_output=True, text=True, check=True)
        results.append(json.loads(proc.stdout))
    fast, slow = results
    names = [k for k in fast if k != "backend"]
    width = max(map(len, names))
    print(f"{'kernel':<{width}}  {fast['backend']:>10}  {slow['backend']:>10}  speedup")
    for k in names:
        print(f"{k:<{width}}  {fast[k]:>9.4f}s  {slow[k]:>9.4f}s  {slow[k] / fast[k]:>6.1f}x")


if __name__ == "__main__":
    main()
