"""Hot numeric kernels: penalized coordinate descent and the glasso inner loop.

Two interchangeable backends are provided. The default wraps the loop
implementations in ``numba.njit`` (nogil, cached); setting the environment
variable ``MIXEDNET_BACKEND=numpy`` before import selects the vectorized
pure-numpy path instead. ``benchmarks/bench_kernels.py`` compares the two.

Both backends solve the same problems:

``cd_solve(G, c, w, nonneg, beta, tol, max_iter)``
    minimize 0.5 * b'Gb - c'b + sum_j w_j * |b_j|, with b_j >= 0 wherever
    ``nonneg`` is set. For a least-squares problem 0.5*||y - Xb||^2 pass
    G = X'X and c = X'y. ``beta`` is updated in place (warm start in,
    solution out); returns (sweeps_used, converged).

``glasso_solve(S, lam, tol, max_iter, inner_tol, inner_max_iter)``
    block coordinate descent for
    -log det T + trace(S T) + sum_jk lam_jk |T_jk|,
    returning (theta, W, cycles, converged) with W the working covariance
    estimate. ``theta`` is the column-wise reconstruction; callers
    symmetrize.
"""
import os

import numpy as np

BACKEND_ENV = "MIXEDNET_BACKEND"


def _cd_solve_numpy(G, c, w, nonneg, beta, tol, max_iter):
    q = beta.shape[0]
    diag = np.ascontiguousarray(np.diag(G))
    sweeps = 0
    for sweep in range(max_iter):
        gb = G @ beta
        delta = 0.0
        for j in range(q):
            gjj = diag[j]
            bj_old = beta[j]
            if gjj <= 0.0:
                bj = 0.0
            else:
                rho = c[j] - gb[j] + gjj * bj_old
                wj = w[j]
                if nonneg[j]:
                    bj = max(rho - wj, 0.0)
                elif rho > wj:
                    bj = rho - wj
                elif rho < -wj:
                    bj = rho + wj
                else:
                    bj = 0.0
                bj /= gjj
            d = bj - bj_old
            if d != 0.0:
                beta[j] = bj
                gb += G[j] * d
                delta = max(delta, abs(d))
        sweeps = sweep + 1
        if delta < tol:
            return sweeps, True
    return sweeps, False


def _glasso_solve_numpy(S, lam, tol, max_iter, inner_tol, inner_max_iter):
    p = S.shape[0]
    W = S.copy()
    W[np.diag_indices(p)] = np.diag(S) + np.diag(lam)
    B = np.zeros((p, p - 1))
    no_mask = np.zeros(p - 1, dtype=np.bool_)
    idx_all = [np.array([i for i in range(p) if i != col]) for col in range(p)]
    cycles = 0
    converged = False
    for cycle in range(max_iter):
        max_change = 0.0
        for col in range(p):
            idx = idx_all[col]
            W11 = np.ascontiguousarray(W[np.ix_(idx, idx)])
            s12 = np.ascontiguousarray(S[idx, col])
            lam12 = np.ascontiguousarray(lam[idx, col])
            beta = B[col]
            _cd_solve_numpy(W11, s12, lam12, no_mask, beta, inner_tol, inner_max_iter)
            w12 = W11 @ beta
            max_change = max(max_change, float(np.max(np.abs(W[idx, col] - w12))))
            W[idx, col] = w12
            W[col, idx] = w12
        cycles = cycle + 1
        if max_change < tol:
            converged = True
            break
    theta = np.zeros((p, p))
    for col in range(p):
        idx = idx_all[col]
        beta = B[col]
        denom = W[col, col] - float(W[idx, col] @ beta)
        t22 = 1.0 / denom
        theta[col, col] = t22
        theta[idx, col] = -beta * t22
    return theta, W, cycles, converged


# Loop-style sources for numba; kept separate from the vectorized fallback so
# each backend stays idiomatic for its runtime.

def _cd_solve_loop(G, c, w, nonneg, beta, tol, max_iter):
    q = beta.shape[0]
    sweeps = 0
    for sweep in range(max_iter):
        gb = np.dot(G, beta)
        delta = 0.0
        for j in range(q):
            gjj = G[j, j]
            bj_old = beta[j]
            if gjj <= 0.0:
                bj = 0.0
            else:
                rho = c[j] - gb[j] + gjj * bj_old
                wj = w[j]
                if nonneg[j]:
                    bj = rho - wj
                    if bj < 0.0:
                        bj = 0.0
                elif rho > wj:
                    bj = rho - wj
                elif rho < -wj:
                    bj = rho + wj
                else:
                    bj = 0.0
                bj = bj / gjj
            d = bj - bj_old
            if d != 0.0:
                beta[j] = bj
                for k in range(q):
                    gb[k] += G[j, k] * d
                ad = abs(d)
                if ad > delta:
                    delta = ad
        sweeps = sweep + 1
        if delta < tol:
            return sweeps, True
    return sweeps, False


def _make_glasso_loop(cd_solve):
    def _glasso_solve_loop(S, lam, tol, max_iter, inner_tol, inner_max_iter):
        p = S.shape[0]
        W = S.copy()
        for i in range(p):
            W[i, i] = S[i, i] + lam[i, i]
        B = np.zeros((p, p - 1))
        no_mask = np.zeros(p - 1, dtype=np.bool_)
        idx = np.empty(p - 1, dtype=np.int64)
        W11 = np.empty((p - 1, p - 1))
        s12 = np.empty(p - 1)
        lam12 = np.empty(p - 1)
        w12 = np.empty(p - 1)
        cycles = 0
        converged = False
        for cycle in range(max_iter):
            max_change = 0.0
            for col in range(p):
                k = 0
                for i in range(p):
                    if i != col:
                        idx[k] = i
                        k += 1
                for a in range(p - 1):
                    ia = idx[a]
                    s12[a] = S[ia, col]
                    lam12[a] = lam[ia, col]
                    for b in range(p - 1):
                        W11[a, b] = W[ia, idx[b]]
                beta = B[col]
                cd_solve(W11, s12, lam12, no_mask, beta, inner_tol, inner_max_iter)
                for a in range(p - 1):
                    acc = 0.0
                    for b in range(p - 1):
                        acc += W11[a, b] * beta[b]
                    w12[a] = acc
                for a in range(p - 1):
                    ia = idx[a]
                    ch = abs(W[ia, col] - w12[a])
                    if ch > max_change:
                        max_change = ch
                    W[ia, col] = w12[a]
                    W[col, ia] = w12[a]
            cycles = cycle + 1
            if max_change < tol:
                converged = True
                break
        theta = np.zeros((p, p))
        for col in range(p):
            k = 0
            for i in range(p):
                if i != col:
                    idx[k] = i
                    k += 1
            acc = 0.0
            for a in range(p - 1):
                acc += W[idx[a], col] * B[col, a]
            t22 = 1.0 / (W[col, col] - acc)
            theta[col, col] = t22
            for a in range(p - 1):
                theta[idx[a], col] = -B[col, a] * t22
        return theta, W, cycles, converged

    return _glasso_solve_loop


def _build_numba_backend():
    from numba import njit

    cd = njit(cache=True, nogil=True)(_cd_solve_loop)
    gl = njit(nogil=True)(_make_glasso_loop(cd))
    return cd, gl


_requested = os.environ.get(BACKEND_ENV, "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        cd_solve, glasso_solve = _build_numba_backend()
        BACKEND = "numba"
    except ImportError:
        cd_solve, glasso_solve = _cd_solve_numpy, _glasso_solve_numpy
        BACKEND = "numpy"
else:
    cd_solve, glasso_solve = _cd_solve_numpy, _glasso_solve_numpy
    BACKEND = "numpy"


def warm_up():
    """Trigger JIT compilation on tiny inputs so timings exclude compile cost."""
    G = np.eye(2)
    c = np.zeros(2)
    w = np.zeros(2)
    mask = np.zeros(2, dtype=np.bool_)
    beta = np.zeros(2)
    cd_solve(G, c, w, mask, beta, 1e-8, 5)
    glasso_solve(np.eye(2), np.zeros((2, 2)), 1e-6, 3, 1e-8, 50)
