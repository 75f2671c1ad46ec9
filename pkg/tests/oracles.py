"""Independent reference implementations used to freeze expected values.

Everything here deliberately avoids the package's solver algebra: the
lasso oracle minimizes by brute-force coordinate line grids over objective
evaluations only, the BLUP oracle uses the alternative matrix identity
with dense solves, and the covariance oracle is a double loop.
"""
import numpy as np


def lasso_objective(X, y, beta, weights, half=True):
    r = y - X @ beta
    quad = 0.5 * float(r @ r) if half else float(r @ r)
    return quad + float(np.asarray(weights) @ np.abs(beta))


def grid_lasso(X, y, weights, nonneg=None, lo=-3.0, hi=3.0, passes=300):
    """Cyclic brute-force line grid minimization of the lasso objective.

    Each coordinate is minimized over an explicit value grid (coarse pass
    at 1e-3 over [lo, hi], then three local refinements down to 1e-9),
    using nothing but objective evaluations. Convexity makes the cyclic
    scheme converge.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    q = X.shape[1]
    weights = np.asarray(weights, dtype=float)
    nonneg = np.zeros(q, dtype=bool) if nonneg is None else np.asarray(nonneg, dtype=bool)
    beta = np.zeros(q)
    # precompute per-coordinate quadratic pieces so grid evaluation is exact
    # but cheap: obj(b_j) = 0.5*a_j*b_j^2 - rho_j*b_j + w|b_j| + const
    G = X.T @ X
    c = X.T @ y

    def coord_grid(j, lo_j, hi_j, step):
        vals = np.arange(lo_j, hi_j + step / 2, step)
        if nonneg[j]:
            vals = vals[vals >= 0.0]
            if vals.size == 0:
                vals = np.array([0.0])
        rho = c[j] - G[j] @ beta + G[j, j] * beta[j]
        obj = 0.5 * G[j, j] * vals ** 2 - rho * vals + weights[j] * np.abs(vals)
        return float(vals[np.argmin(obj)])

    for _ in range(passes):
        prev = beta.copy()
        for j in range(q):
            best = coord_grid(j, lo, hi, 1e-3)
            best = coord_grid(j, best - 2e-3, best + 2e-3, 1e-5)
            best = coord_grid(j, best - 2e-5, best + 2e-5, 1e-7)
            beta[j] = coord_grid(j, best - 2e-7, best + 2e-7, 1e-9)
        if np.max(np.abs(beta - prev)) < 1e-12:
            break
    return beta


def blup_woodbury(X, y, beta, sigma_re):
    """Posterior-mean identity D X'(X D^2 X' + I)^{-1} (y - X beta)."""
    X = np.asarray(X, dtype=float)
    D = np.diag(np.asarray(sigma_re, dtype=float))
    r = np.asarray(y, dtype=float) - X @ beta
    n = X.shape[0]
    M = X @ D @ D @ X.T + np.eye(n)
    return D @ X.T @ np.linalg.solve(M, r)


def naive_covariance(X):
    """Explicit double-loop (1/n) X'X after centering."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    means = [sum(X[i, j] for i in range(n)) / n for j in range(p)]
    S = np.zeros((p, p))
    for j in range(p):
        for k in range(p):
            S[j, k] = sum((X[i, j] - means[j]) * (X[i, k] - means[k]) for i in range(n)) / n
    return S


def glasso_objective(S, lam, theta):
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return np.inf
    return -logdet + float(np.sum(S * theta)) + float(np.sum(lam * np.abs(theta)))


def glasso_kkt_violation(S, lam, theta, support_tol=0.0):
    """Max KKT residual: S - theta^{-1} + lam o sign(theta) on the support,
    and the excess of |S - theta^{-1}| over lam off the support."""
    W = np.linalg.inv(theta)
    grad = S - W
    p = S.shape[0]
    worst = 0.0
    for i in range(p):
        for j in range(p):
            if abs(theta[i, j]) > support_tol:
                worst = max(worst, abs(grad[i, j] + lam[i, j] * np.sign(theta[i, j])))
            else:
                worst = max(worst, abs(grad[i, j]) - lam[i, j])
    return worst


def glasso_coordinate_grid_gap(S, lam, theta, radius=0.05, steps=101):
    """Largest objective decrease achievable by perturbing any single
    symmetric entry (a 2x2-block move) over a dense line grid."""
    base = glasso_objective(S, lam, theta)
    p = S.shape[0]
    best_gain = 0.0
    deltas = np.linspace(-radius, radius, steps)
    for i in range(p):
        for j in range(i, p):
            for d in deltas:
                if d == 0.0:
                    continue
                cand = theta.copy()
                cand[i, j] += d
                if i != j:
                    cand[j, i] += d
                val = glasso_objective(S, lam, cand)
                if base - val > best_gain:
                    best_gain = base - val
    return best_gain
