"""Compare the compiled and pure-Python kernel backends.

Times the SVR dual solver and Lloyd iterations on problems shaped like the
real workload (K labels x 12 estimators; ~100 trials clustered into k groups),
checks that both backends agree, and times one end-to-end subject run.

    python3 benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import timeit

import numpy as np

from activestack import _pykernels, kernels
from activestack.datagen import CohortSpec, generate_cohort
from activestack.numerics import RandomSource, _kmeanspp

try:
    from activestack import _ckernels
except ImportError:
    _ckernels = None


def svr_problem(K, M, seed):
    rng = np.random.default_rng(seed)
    y = 60 + 40 * rng.random(K)
    X = y[:, None] + rng.normal(0, 2, (K, M))
    X[rng.random((K, M)) < 0.05] = 1200.0
    return X @ X.T, y


def lloyd_problem(n, M, k, seed):
    rec = generate_cohort(CohortSpec(n_subjects=1, trials_per_subject=(n, n), m_estimators=M, seed=seed))[0]
    X = np.ascontiguousarray(rec.predictions)
    return X, _kmeanspp(X, k, RandomSource(seed))


def bench(label, fn, repeats):
    t = min(timeit.repeat(fn, number=1, repeat=repeats))
    print(f"  {label:<10}{t * 1e6:>12.1f} us")
    return t


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    if _ckernels is None:
        print("compiled extension not built; only the Python backend is timed")
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])

    for K in (3, 7, 20):
        G, y = svr_problem(K, 12, K)
        print(f"svr_ipm  K={K}")
        times, betas = {}, {}
        for name, mod in backends:
            times[name] = bench(name, lambda: mod.svr_ipm(G, y, 1.0, 0.0, 1e-8, 100000), args.repeats)
            betas[name] = np.asarray(mod.svr_ipm(G, y, 1.0, 0.0, 1e-8, 100000)[0])
        if len(times) == 2:
            diff = np.max(np.abs(betas["python"] - betas["cython"]))
            print(f"  speedup {times['python'] / times['cython']:.1f}x, max |beta diff| {diff:.2e}")

    for n, k in ((60, 4), (120, 7)):
        X, init = lloyd_problem(n, 12, k, n)
        print(f"lloyd    n={n} k={k}")
        times, outs = {}, {}
        for name, mod in backends:
            times[name] = bench(name, lambda: mod.lloyd(X, init, 300), args.repeats)
            outs[name] = mod.lloyd(X, init, 300)
        if len(times) == 2:
            same = np.array_equal(outs["python"][0], outs["cython"][0]) and outs["python"][2] == outs["cython"][2]
            print(f"  speedup {times['python'] / times['cython']:.1f}x, bitwise identical: {same}")

    from activestack.pipeline import RunConfig, run_subject

    rec = generate_cohort(CohortSpec(n_subjects=1, seed=5))[0]
    cfg = RunConfig("as_rd_emcm", K=7, seed=1)
    t = min(timeit.repeat(lambda: run_subject(rec, cfg), number=1, repeat=max(3, args.repeats // 20)))
    print(f"run_subject as_rd_emcm K=7 N={rec.n_trials} ({kernels.BACKEND}): {t * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
