"""Compare the numba kernels with the pure-numpy fallback.

The backend is fixed at import time, so each one runs in a child process with
SEAGULL_BACKEND set. Usage:

    python3 benchmarks/bench_backends.py [--size 1000000] [--nodes 100]
"""
import argparse
import json
import os
import subprocess
import sys
import time


def _best(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def child(size, nodes, reps):
    import numpy as np
    from seagull import _kernels as K
    from seagull.engine import LocalEngine
    from seagull.fib import encode_for_sharing
    from seagull.oracle import random_tree_fib
    from seagull.verifier import is_loop_free

    rng = np.random.default_rng(0)
    a = (rng.integers(0, K.P, size=size, dtype=np.int64)).astype(np.uint64)
    b = (rng.integers(0, K.P, size=size, dtype=np.int64)).astype(np.uint64)
    x = (rng.integers(0, K.P, size=(3, size), dtype=np.int64)).astype(np.uint64)
    K.mulmod(a[:8], b[:8])  # compile outside the timed region
    K.summod(x[:, :8], 0)
    eng = LocalEngine(seed=1)
    eng.mul(x[:, :8], x[:, :8])

    out = {"backend": K.BACKEND}
    out["mulmod_ns"] = _best(lambda: K.mulmod(a, b), reps) / size * 1e9
    out["summod_ns"] = _best(lambda: K.summod(x, 0), reps) / size * 1e9
    out["beaver_ns"] = _best(lambda: eng.mul(x, x), reps) / size * 1e9
    fib = random_tree_fib(nodes, "caida-like", rng)
    sf = encode_for_sharing(fib, 3, rng)
    t0 = time.perf_counter()
    v = is_loop_free(LocalEngine(seed=2), sf)
    out["loop_free_s"] = time.perf_counter() - t0
    out["loop_free_mults"] = v.trace.multiplications
    assert v.result
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1_000_000)
    ap.add_argument("--nodes", type=int, default=100)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.size, args.nodes, args.reps)
        return
    rows = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, SEAGULL_BACKEND=backend)
        res = subprocess.run([sys.executable, __file__, "--child", "--size", str(args.size),
                              "--nodes", str(args.nodes), "--reps", str(args.reps)],
                             env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(res.stdout.strip().splitlines()[-1]))
    keys = ["mulmod_ns", "summod_ns", "beaver_ns", "loop_free_s"]
    print(f"{'backend':8} " + " ".join(f"{k:>12}" for k in keys))
    for r in rows:
        print(f"{r['backend']:8} " + " ".join(f"{r[k]:12.3f}" for k in keys))
    nb, npy = rows
    print("speedup  " + " ".join(f"{npy[k] / nb[k]:12.1f}" for k in keys))
    print(f"(loop_free: n={args.nodes}, {nb['loop_free_mults']} secure multiplications)")


if __name__ == "__main__":
    main()
