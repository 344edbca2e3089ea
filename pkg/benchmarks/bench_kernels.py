"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--sizes 1000,100000] [--repeat 7] [--json out.json]

Reports the median wall time per call after one warm-up call (which absorbs
JIT compilation), and checks the two paths agree before timing them.
"""

from __future__ import annotations

import argparse
import json
import platform
import statistics
import time

import numpy as np

from surrogate_itr import _kernels


def _median_time(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def influence_case(n, rng):
    a = (rng.random(n) < 0.5) * 1.0
    args = (a, rng.random(n), rng.uniform(0.05, 0.95, n), rng.random(n), rng.random(n),
            (rng.random(n) < 0.3) * 1.0, (rng.random(n) < 0.3) * 1.0, 0.3)
    ref = _kernels.influence_terms_numpy(*args)
    got = _kernels.influence_terms_numba(*args)
    assert all(np.allclose(x, y, rtol=0, atol=1e-15) for x, y in zip(ref, got))
    return (lambda: _kernels.influence_terms_numpy(*args)), (lambda: _kernels.influence_terms_numba(*args))


def split_case(n, rng):
    X = rng.normal(size=(n, 2))
    resid = np.sin(3 * X[:, 0]) + rng.normal(size=n)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))
    ref = _kernels.best_split_numpy(X, order, resid, 5)
    got = _kernels.best_split_numba(X, order, resid, 5)
    assert int(ref[0]) == int(got[0]) and abs(ref[1] - got[1]) < 1e-12
    return (lambda: _kernels.best_split_numpy(X, order, resid, 5)), (lambda: _kernels.best_split_numba(X, order, resid, 5))


CASES = {"influence_terms": influence_case, "best_split": split_case}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,10000,100000")
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'kernel':<17}{'n':>9}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}")
    for name, make in CASES.items():
        for n in sizes:
            f_np, f_nb = make(n, rng)
            t_np, t_nb = _median_time(f_np, args.repeat), _median_time(f_nb, args.repeat)
            rows.append({"kernel": name, "n": n, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb})
            print(f"{name:<17}{n:>9}{t_np * 1e3:>11.3f}{t_nb * 1e3:>11.3f}{t_np / t_nb:>9.2f}")
    if args.json:
        meta = {"python": platform.python_version(), "machine": platform.machine(), "numpy": np.__version__}
        with open(args.json, "w") as fh:
            json.dump({"meta": meta, "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
