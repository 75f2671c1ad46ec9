"""Per-node penalized mixed-effects EM and assembly of the three networks.

Each node v is regressed on the remaining nodes with a fixed effect shared
by the whole cohort plus a per-subject random effect whose per-coordinate
scale is itself penalized. The fixed-effect support yields population
edges, the random-effect scale support yields the high-variability edges,
and the per-subject BLUPs yield subject-specific edges.

Everything runs on per-subject Gram matrices, so a full fit touches the
raw time series once. The EM alternates the closed-form BLUP update
(E-step) with a joint weighted lasso over stacked fixed- and random-effect
columns (M-step); both steps decrease

    F(beta, sigma, b) = sum_i 0.5*||y_i - X_i beta - X_i diag(sigma) b_i||^2
                        + 0.5*||b_i||^2  + lam1*||beta||_1 + lam2*||sigma||_1,

so the iteration is a block coordinate descent on F.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import cd_solve
from .errors import DimensionError, DomainError, NumericError
from .graphs import EdgeSet, WeightedNetwork

SIGMA2_FLOOR = 1e-8


@dataclass(frozen=True)
class MnsConfig:
    """Penalties and stopping rules for the mixed-effects network fit."""

    lambda1: float
    lambda2: float
    em_tol: float = 1e-4
    em_max_iter: int = 200
    rule: str = "and"
    lasso_tol: float = 1e-6
    lasso_max_iter: int = 10_000
    blup_tol: float = 1e-8
    track_objective: bool = False

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise DomainError("penalties must be nonnegative")
        if self.em_tol <= 0:
            raise DomainError("em_tol must be positive")
        if self.rule not in ("and", "or"):
            raise DomainError("rule must be 'and' or 'or'")


@dataclass(frozen=True)
class MnsNodeFit:
    """EM output for one node: 2(p-1)+1 parameters plus per-subject BLUPs."""

    node: int
    beta: np.ndarray
    sigma_re: np.ndarray
    sigma2: float
    blups: np.ndarray
    em_iterations: int
    converged: bool
    objective_trace: tuple = ()

    def __post_init__(self):
        if np.any(self.sigma_re < 0):
            raise DomainError("random-effect scales must be nonnegative")
        if self.sigma2 <= 0:
            raise DomainError("noise variance must be positive")
        if np.any(self.blups[:, self.sigma_re == 0.0] != 0.0):
            raise NumericError("BLUPs must vanish where the random-effect scale is zero")


@dataclass(frozen=True)
class MnsResult:
    """Population, variance and per-subject networks plus the node fits."""

    population: WeightedNetwork
    variance_net: WeightedNetwork
    subject_nets: tuple
    node_fits: tuple
    rule: str

    @property
    def p(self) -> int:
        return self.population.p

    @property
    def n_subjects(self) -> int:
        return len(self.subject_nets)

    def population_edges(self) -> EdgeSet:
        return EdgeSet.from_mask(self.population.weights != 0.0)

    def variance_edges(self) -> EdgeSet:
        return EdgeSet.from_mask(self.variance_net.weights != 0.0)

    def subject_edges(self, i: int) -> EdgeSet:
        """Random-effect-only edges of subject i."""
        return EdgeSet.from_mask(self.subject_nets[i].weights != 0.0)

    def subject_full_edges(self, i: int) -> EdgeSet:
        """Full subject network: population plus subject-specific edges."""
        return self.population_edges().union(self.subject_edges(i))


def e_step(design: np.ndarray, response: np.ndarray, beta: np.ndarray,
           sigma_re: np.ndarray) -> np.ndarray:
    """Closed-form BLUP for one subject.

    b = (D X'X D + I)^{-1} D X'(y - X beta) with D = diag(sigma_re).
    Coordinates with a zero scale are exactly zero: the solve is restricted
    to the active coordinates.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.shape[0] != y.shape[0] or X.shape[1] != beta.shape[0] or beta.shape != sigma_re.shape:
        raise DimensionError("e_step inputs have inconsistent shapes")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))
            and np.all(np.isfinite(beta)) and np.all(np.isfinite(sigma_re))):
        raise NumericError("e_step inputs contain non-finite values")
    G = X.T @ X
    c = X.T @ y
    return _blup_from_grams(G, c, beta, sigma_re)


def _blup_from_grams(G, c, beta, sigma_re):
    m = beta.shape[0]
    b = np.zeros(m)
    active = np.nonzero(sigma_re > 0.0)[0]
    if active.size == 0:
        return b
    resid_corr = c - G @ beta
    d = sigma_re[active]
    Ga = G[np.ix_(active, active)]
    M = Ga * np.outer(d, d)
    M[np.diag_indices(active.size)] += 1.0
    b[active] = np.linalg.solve(M, d * resid_corr[active])
    return b


def m_step(designs, responses, blups, lambda1: float, lambda2: float,
           tol: float = 1e-6, max_iter: int = 10_000, warm_start=None):
    """Joint weighted lasso over stacked fixed- and random-effect columns.

    Builds [X_i | X_i * diag(b_i)] per subject, stacks all subjects, and
    solves for the shared (beta, sigma) with lambda1 on the beta block and
    lambda2 on the nonnegative sigma block. This is the definitional form;
    the EM loop computes the same solution from Gram matrices.
    """
    from .lasso import LassoProblem, solve_lasso

    designs = [np.asarray(x, dtype=float) for x in designs]
    responses = [np.asarray(y, dtype=float) for y in responses]
    blups = np.asarray(blups, dtype=float)
    if len(designs) != len(responses) or len(designs) != blups.shape[0]:
        raise DimensionError("need matching designs, responses and BLUPs per subject")
    m = designs[0].shape[1]
    Z = np.vstack([np.hstack([x, x * b[None, :]]) for x, b in zip(designs, blups)])
    y = np.concatenate(responses)
    weights = np.concatenate([np.full(m, lambda1), np.full(m, lambda2)])
    mask = np.zeros(2 * m, dtype=np.bool_)
    mask[m:] = True
    sol = solve_lasso(LassoProblem(Z, y, weights, mask), tol, max_iter, warm_start)
    return sol.coefficients[:m], sol.coefficients[m:]


def update_sigma2(residuals, blups, p: int) -> float:
    """Closed-form noise-variance maximizer of the complete-data likelihood.

    sigma2 = sum_i (||r_i||^2 + ||b_i||^2) / sum_i (n_i + p), floored at
    1e-8 so a perfect fit keeps the likelihood finite.
    """
    residuals = list(residuals)
    blups = list(blups)
    if not residuals or len(residuals) != len(blups):
        raise DimensionError("need one residual vector and one BLUP vector per subject")
    num = sum(float(np.dot(r, r)) for r in residuals) + sum(float(np.dot(b, b)) for b in blups)
    den = sum(len(r) + p for r in residuals)
    return max(num / den, SIGMA2_FLOOR)


class _NodeProblem:
    """Gram-matrix view of one node's mixed-model regression."""

    def __init__(self, grams, n_obs, v):
        p = grams[0].shape[0]
        idx = np.concatenate([np.arange(v), np.arange(v + 1, p)])
        self.p = p
        self.m = p - 1
        self.n_obs = n_obs
        self.G = [np.ascontiguousarray(g[np.ix_(idx, idx)]) for g in grams]
        self.c = [np.ascontiguousarray(g[idx, v]) for g in grams]
        self.yy = [float(g[v, v]) for g in grams]
        self.A = sum(self.G)
        self.csum = sum(self.c)

    def residual_sq(self, beta, sigma, b):
        """Per-subject ||y_i - X_i beta - X_i diag(sigma) b_i||^2 from Grams."""
        out = []
        for Gi, ci, yyi, bi in zip(self.G, self.c, self.yy, b):
            gamma = beta + sigma * bi
            out.append(max(yyi - 2.0 * float(gamma @ ci) + float(gamma @ (Gi @ gamma)), 0.0))
        return out

    def objective(self, beta, sigma, b, lam1, lam2):
        rss = sum(self.residual_sq(beta, sigma, b))
        bb = sum(float(bi @ bi) for bi in b)
        return 0.5 * rss + 0.5 * bb + lam1 * float(np.sum(np.abs(beta))) \
            + lam2 * float(np.sum(np.abs(sigma)))


def _fit_node(problem: _NodeProblem, cfg: MnsConfig, warm_beta=None):
    # sigma always restarts at ones: a zero sigma coordinate forces zero
    # BLUPs, whose zero design columns keep sigma at zero, so carrying a
    # sparse sigma over from a stronger penalty would pin the variance
    # support instead of letting the new penalty choose it.
    m = problem.m
    N = len(problem.G)
    beta = np.zeros(m) if warm_beta is None else np.array(warm_beta, dtype=float)
    sigma = np.ones(m)
    b = np.zeros((N, m))
    theta = np.ascontiguousarray(np.concatenate([beta, sigma]))

    Gj = np.zeros((2 * m, 2 * m))
    cj = np.zeros(2 * m)
    Gj[:m, :m] = problem.A
    cj[:m] = problem.csum
    weights = np.ascontiguousarray(np.concatenate([np.full(m, cfg.lambda1),
                                                   np.full(m, cfg.lambda2)]))
    nonneg = np.zeros(2 * m, dtype=np.bool_)
    nonneg[m:] = True

    trace = []
    converged = False
    iterations = 0
    for it in range(cfg.em_max_iter):
        iterations = it + 1
        for i in range(N):
            b[i] = _blup_from_grams(problem.G[i], problem.c[i], beta, sigma)
        if cfg.track_objective:
            trace.append(("e", problem.objective(beta, sigma, b, cfg.lambda1, cfg.lambda2)))

        C = sum(Gi * bi[None, :] for Gi, bi in zip(problem.G, b))
        Gj[:m, m:] = C
        Gj[m:, :m] = C.T
        Gj[m:, m:] = sum((bi[:, None] * Gi) * bi[None, :] for Gi, bi in zip(problem.G, b))
        cj[m:] = sum(bi * ci for ci, bi in zip(problem.c, b))
        cd_solve(Gj, cj, weights, nonneg, theta, cfg.lasso_tol, cfg.lasso_max_iter)
        np.maximum(theta[m:], 0.0, out=theta[m:])

        new_beta, new_sigma = theta[:m].copy(), theta[m:].copy()
        if cfg.track_objective:
            trace.append(("m", problem.objective(new_beta, new_sigma, b, cfg.lambda1, cfg.lambda2)))
        change = max(float(np.max(np.abs(new_beta - beta))) if m else 0.0,
                     float(np.max(np.abs(new_sigma - sigma))) if m else 0.0)
        beta, sigma = new_beta, new_sigma
        if change < cfg.em_tol:
            converged = True
            break

    for i in range(N):
        b[i] = _blup_from_grams(problem.G[i], problem.c[i], beta, sigma)
    residuals_sq = problem.residual_sq(beta, sigma, b)
    num = sum(residuals_sq) + sum(float(bi @ bi) for bi in b)
    den = sum(n_i + problem.p for n_i in problem.n_obs)
    sigma2 = max(num / den, SIGMA2_FLOOR)
    return beta, sigma, sigma2, b, iterations, converged, tuple(trace)


def fit_node(cohort, v: int, cfg: MnsConfig) -> MnsNodeFit:
    """Run the EM for a single node of the cohort."""
    subjects = cohort.subjects
    p = subjects[0].shape[1]
    if not 0 <= v < p:
        raise DimensionError(f"node index {v} outside 0..{p - 1}")
    if any(x.shape[0] < 2 for x in subjects):
        raise DomainError("every subject needs at least 2 observations")
    grams = [np.ascontiguousarray(x.T @ x) for x in subjects]
    problem = _NodeProblem(grams, [x.shape[0] for x in subjects], v)
    beta, sigma, sigma2, b, iters, conv, trace = _fit_node(problem, cfg)
    return MnsNodeFit(v, beta, sigma, sigma2, b, iters, conv, trace)


def _insert_node_column(p, v, vec):
    out = np.zeros(p)
    out[:v] = vec[:v]
    out[v + 1:] = vec[v:]
    return out


def _assemble(node_fits, rule, blup_tol):
    p = len(node_fits)
    N = node_fits[0].blups.shape[0]
    B = np.zeros((p, p))
    Sg = np.zeros((p, p))
    Bl = np.zeros((N, p, p))
    for fit in node_fits:
        v = fit.node
        B[v] = _insert_node_column(p, v, fit.beta)
        Sg[v] = _insert_node_column(p, v, fit.sigma_re)
        for i in range(N):
            Bl[i, v] = _insert_node_column(p, v, fit.blups[i])

    def combine(directed, thresh=0.0):
        nz = np.abs(directed) > thresh
        mask = (nz & nz.T) if rule == "and" else (nz | nz.T)
        np.fill_diagonal(mask, False)
        w = (directed + directed.T) / 2.0 * mask
        return WeightedNetwork((w + w.T) / 2.0)

    population = combine(B)
    variance = combine(Sg)
    subjects = tuple(combine(Bl[i], blup_tol) for i in range(N))
    return MnsResult(population, variance, subjects, tuple(node_fits), rule)


def fit_all(cohort, cfg: MnsConfig, threads: int = 1) -> MnsResult:
    """Fit every node and assemble the population, variance and subject nets.

    Node fits are independent; with threads > 1 they run concurrently and
    are assembled by node index, so the result does not depend on
    scheduling.
    """
    return fit_path(cohort, [(cfg.lambda1, cfg.lambda2)], cfg, threads)[0]


def fit_path(cohort, penalty_pairs, cfg: MnsConfig, threads: int = 1) -> list:
    """Fit a sequence of (lambda1, lambda2) pairs with per-node warm starts.

    Pass the pairs in decreasing-penalty order for the usual path speedup;
    results are returned in the order given.
    """
    subjects = cohort.subjects
    if not subjects:
        raise DomainError("cohort is empty")
    p = subjects[0].shape[1]
    if p < 2:
        raise DomainError("need p >= 2 nodes")
    if any(x.shape[0] < 2 for x in subjects):
        raise DomainError("every subject needs at least 2 observations")
    penalty_pairs = [(float(l1), float(l2)) for l1, l2 in penalty_pairs]
    grams = [np.ascontiguousarray(x.T @ x) for x in subjects]
    n_obs = [x.shape[0] for x in subjects]

    def run_node(v):
        problem = _NodeProblem(grams, n_obs, v)
        fits = []
        warm_beta = None
        for lam1, lam2 in penalty_pairs:
            node_cfg = _with_penalties(cfg, lam1, lam2)
            beta, sigma, s2, b, iters, conv, trace = _fit_node(problem, node_cfg, warm_beta)
            fits.append(MnsNodeFit(v, beta, sigma, s2, b, iters, conv, trace))
            warm_beta = beta
        return fits

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_node = list(pool.map(run_node, range(p)))
    else:
        per_node = [run_node(v) for v in range(p)]

    results = []
    for k in range(len(penalty_pairs)):
        results.append(_assemble([per_node[v][k] for v in range(p)], cfg.rule, cfg.blup_tol))
    return results


def _with_penalties(cfg: MnsConfig, lam1, lam2) -> MnsConfig:
    if cfg.lambda1 == lam1 and cfg.lambda2 == lam2:
        return cfg
    return MnsConfig(lam1, lam2, cfg.em_tol, cfg.em_max_iter, cfg.rule,
                     cfg.lasso_tol, cfg.lasso_max_iter, cfg.blup_tol, cfg.track_objective)


def penalty_max(cohort) -> float:
    """Largest stacked predictor-response inner product over all nodes.

    Used as the top of regularization grids: at lambda1 past this value the
    fixed-effect lasso solution is empty for every node.
    """
    total = sum(x.T @ x for x in cohort.subjects)
    off = np.abs(total)
    np.fill_diagonal(off, 0.0)
    return float(off.max())
