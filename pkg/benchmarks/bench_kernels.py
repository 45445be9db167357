"""Time the numba and numpy kernel backends on the workloads the studies use.

    python benchmarks/bench_kernels.py [--rows 2000] [--repeats 3]

Each backend runs in its own interpreter because the backend is chosen once,
at import, from UPLIFT_EVAL_BACKEND. Numba compile time is excluded by a
warm-up call. Outputs of the two backends are compared for equality.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeats):
    fn()  # warm-up (jit compile)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def worker(rows: int, repeats: int) -> dict:
    from uplift_eval import kernels, metrics, sim
    from uplift_eval.data import ScoredTestSet
    from uplift_eval.learners import BaggedTrees, KnnRegressor

    world = sim.SimWorld("aw", 1.0)
    ds, truth = sim.generate(world, rows, sim.stream(0))
    test, _ = sim.generate(world, rows // 2, sim.stream(1))
    forest = BaggedTrees(n_trees=100, max_depth=8, min_leaf=5, seed=0)
    res = {"backend": kernels.BACKEND}
    t, _ = _best(lambda: forest.fit(ds.X, ds.Y), repeats)
    res["forest fit (100 trees)"] = t
    t, pred = _best(lambda: forest.predict(test.X), repeats)
    res["forest predict"] = t
    knn = KnnRegressor(k=10).fit(ds.X, ds.Y)
    t, kp = _best(lambda: knn.predict(test.X), repeats)
    res["knn predict (k=10)"] = t
    scored = ScoredTestSet(ds, {"s": truth.tau})
    t, seg = _best(lambda: metrics.segment_estimates(scored, "s", shares=metrics.PERCENTS), repeats)
    res["segment stats (100 shares)"] = t
    res["checksum"] = [float(np.sum(pred)), float(np.sum(kp)), float(np.nansum(seg))]
    return res


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        print(json.dumps(worker(args.rows, args.repeats)))
        return 0
    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, UPLIFT_EVAL_BACKEND=backend)
        out = subprocess.run([sys.executable, __file__, "--worker", "--rows", str(args.rows), "--repeats", str(args.repeats)],
                             env=env, capture_output=True, text=True, check=True)
        results[backend] = json.loads(out.stdout)
    a, b = results["numba"], results["numpy"]
    print(f"rows={args.rows} repeats={args.repeats} (best of, seconds)")
    print(f"{'kernel':<28}{'numba':>10}{'numpy':>10}{'speedup':>10}")
    for key in a:
        if key in ("backend", "checksum"):
            continue
        print(f"{key:<28}{a[key]:>10.4f}{b[key]:>10.4f}{b[key] / a[key]:>9.1f}x")
    same = a["checksum"] == b["checksum"]
    print(f"outputs identical across backends: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
