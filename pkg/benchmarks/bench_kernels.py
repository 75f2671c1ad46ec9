"""Benchmark the njit kernels against the pure-numpy fallback.

Runs the penalized coordinate descent and the glasso block solver on
representative problem sizes with both backends and prints a timing table.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from mixednet import _kernels


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cd_problem(rng, n, q):
    X = rng.standard_normal((n, q))
    y = rng.standard_normal(n)
    G = np.ascontiguousarray(X.T @ X)
    c = np.ascontiguousarray(X.T @ y)
    w = np.full(q, 0.1 * np.max(np.abs(c)))
    mask = np.zeros(q, dtype=np.bool_)
    mask[q // 2:] = True
    return G, c, w, mask


def _cov_problem(rng, n, p):
    X = rng.standard_normal((n, p)) @ (np.eye(p) + 0.3 * rng.standard_normal((p, p)))
    X -= X.mean(axis=0)
    S = np.ascontiguousarray(X.T @ X / n)
    lam = np.full((p, p), 0.1 * np.max(np.abs(S - np.diag(np.diag(S)))))
    np.fill_diagonal(lam, 0.0)
    return S, lam


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    try:
        numba_cd, numba_gl = _kernels._build_numba_backend()
        backends = [("numba", numba_cd, numba_gl),
                    ("numpy", _kernels._cd_solve_numpy, _kernels._glasso_solve_numpy)]
        # trigger compilation outside the timed region
        g, c, w, m = _cd_problem(np.random.default_rng(0), 4, 2)
        numba_cd(g, c, w, m, np.zeros(2), 1e-8, 10)
        s, l = _cov_problem(np.random.default_rng(0), 10, 3)
        numba_gl(s, l, 1e-5, 10, 1e-8, 100)
    except ImportError:
        print("numba unavailable; benchmarking the numpy backend only")
        backends = [("numpy", _kernels._cd_solve_numpy, _kernels._glasso_solve_numpy)]

    rng = np.random.default_rng(42)
    rows = []
    for n, q in ((200, 40), (2000, 98), (500, 198)):
        G, c, w, mask = _cd_problem(rng, n, q)
        for name, cd, _ in backends:
            beta = np.zeros(q)
            t = _time(lambda: (beta.fill(0.0), cd(G, c, w, mask, beta, 1e-8, 10_000)),
                      args.repeat)
            rows.append((f"cd_solve n={n} q={q}", name, t))
    for n, p in ((200, 20), (400, 50)):
        S, lam = _cov_problem(rng, n, p)
        for name, _, gl in backends:
            t = _time(lambda: gl(S, lam, 1e-5, 200, 1e-9, 2000), args.repeat)
            rows.append((f"glasso p={p}", name, t))

    width = max(len(r[0]) for r in rows)
    print(f"{'problem':<{width}}  backend  best-of-{args.repeat}")
    speedup = {}
    for problem, name, t in rows:
        print(f"{problem:<{width}}  {name:<7}  {t * 1e3:9.2f} ms")
        speedup.setdefault(problem, {})[name] = t
    if len(backends) == 2:
        print()
        for problem, times in speedup.items():
            print(f"{problem:<{width}}  numba speedup: {times['numpy'] / times['numba']:.1f}x")


if __name__ == "__main__":
    main()
