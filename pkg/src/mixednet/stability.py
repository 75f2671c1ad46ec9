"""Bootstrap stability baseline: randomized penalties, StARS tuning and
Beta-Binomial pooling of per-subject edge frequencies.

Each subject gets a StARS-selected base penalty, then B bootstrap glasso
fits with randomized elementwise penalties. Per-edge selection frequencies
are pooled across subjects by method-of-moments into a population
presence score (mu_pop) and a between-subject dispersion score (rho_pop);
high dispersion flags highly variable edges.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import CohortData
from .errors import DimensionError, DomainError, NumericError
from .glasso import GlassoProblem, penalty_upper_bound, sample_covariance, solve_glasso
from .tuning import make_lambda_grid


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass(frozen=True)
class StabilityConfig:
    B: int = 200
    c: float = 0.25
    stars_beta: float = 0.05
    stars_subsamples: int = 20
    stars_grid_size: int = 30
    seed: int = 0
    glasso_tol: float = 1e-4
    glasso_max_iter: int = 200

    def __post_init__(self):
        if self.B < 2:
            raise DomainError("need at least 2 bootstrap iterations")
        if self.c < 0:
            raise DomainError("randomization amplitude c must be nonnegative")
        if not 0.0 < self.stars_beta < 0.5:
            raise DomainError("stars_beta must lie in (0, 0.5)")
        if self.stars_subsamples < 2:
            raise DomainError("need at least 2 StARS subsamples")


@dataclass(frozen=True)
class StabilityResult:
    mu_pop: np.ndarray
    rho_pop: np.ndarray
    per_subject_freq: np.ndarray  # N x p x p
    lambdas: tuple  # StARS-selected penalty per subject
    degenerate: np.ndarray  # edges where mu is exactly 0 or 1
    skipped: tuple  # failed bootstrap iterations per subject

    @property
    def p(self) -> int:
        return self.mu_pop.shape[0]


def _stars_subsample_size(n: int) -> int:
    # floor(10*sqrt(n)) only subsamples for n > 144; use the usual 0.8n below
    if n > 144:
        return int(np.floor(10.0 * np.sqrt(n)))
    return int(np.floor(0.8 * n))


def stars_select_lambda(data: np.ndarray, cfg: StabilityConfig, rng=None) -> float:
    """Subsampling-based penalty selection for one subject.

    Walks a descending penalty grid and keeps going while the running
    supremum of the average edge instability 2*theta*(1-theta) stays at or
    below stars_beta; returns the smallest such penalty. If instability
    never crosses the threshold the smallest grid value is returned with a
    warning.
    """
    data = np.asarray(data, dtype=float)
    n, p = data.shape
    if n < 20:
        raise DomainError("StARS needs at least 20 observations")
    if rng is None:
        rng = _rng(cfg.seed, 1)
    lam_max = penalty_upper_bound(sample_covariance(data))
    if lam_max == 0.0:
        return 0.0
    grid = make_lambda_grid(lam_max, cfg.stars_grid_size)
    m = _stars_subsample_size(n)
    counts = np.zeros((len(grid), p, p))
    for _ in range(cfg.stars_subsamples):
        rows = rng.choice(n, size=m, replace=False)
        S = sample_covariance(data[rows])
        for gi, lam in enumerate(grid):
            sol = solve_glasso(GlassoProblem(S, lam), cfg.glasso_tol, cfg.glasso_max_iter)
            counts[gi] += sol.theta.theta != 0.0
    freq = counts / cfg.stars_subsamples
    iu = np.triu_indices(p, k=1)
    instability = (2.0 * freq * (1.0 - freq))[:, iu[0], iu[1]].mean(axis=1)

    selected = None
    running_sup = 0.0
    for gi, lam in enumerate(grid):
        running_sup = max(running_sup, float(instability[gi]))
        if running_sup > cfg.stars_beta:
            break
        selected = float(lam)
    if selected is None:
        return float(grid[0])
    if selected == float(grid[-1]):
        warnings.warn("StARS grid exhausted without crossing the instability "
                      "threshold; returning the smallest grid penalty")
    return selected


def randomized_penalty_matrix(p: int, lambda_i: float, lambda_max_i: float,
                              c: float, rng) -> np.ndarray:
    """Symmetric penalty matrix lambda_i + c*lambda_max_i*W, W in {-1,+1}.

    The diagonal is left unpenalized. Negative entries (possible when
    c*lambda_max exceeds lambda) are clamped at zero with a warning.
    """
    if c < 0:
        raise DomainError("randomization amplitude c must be nonnegative")
    lam = np.full((p, p), float(lambda_i))
    iu = np.triu_indices(p, k=1)
    signs = np.where(rng.random(iu[0].size) < 0.5, 1.0, -1.0)
    lam[iu] = lambda_i + c * lambda_max_i * signs
    lam.T[iu] = lam[iu]
    np.fill_diagonal(lam, 0.0)
    if np.any(lam < 0):
        warnings.warn("randomized penalties went negative (c*lambda_max > lambda); "
                      "clamping at zero")
        np.clip(lam, 0.0, None, out=lam)
    return lam


def bootstrap_networks(data: np.ndarray, lambda_i: float, cfg: StabilityConfig,
                       subject: int = 0):
    """Per-edge selection frequencies over B bootstrap glasso fits.

    Each iteration resamples rows with replacement, draws a fresh
    randomized penalty and records the glasso support. The generator for
    iteration b is derived from (seed, subject, b), so results do not
    depend on execution order. Failed solves are skipped and counted.

    Returns (Y, skipped) with Y the p x p frequency matrix.
    """
    data = np.asarray(data, dtype=float)
    n, p = data.shape
    lam_max = penalty_upper_bound(sample_covariance(data))
    counts = np.zeros((p, p))
    skipped = 0
    for b in range(cfg.B):
        rng = _rng(cfg.seed, 2, subject, b)
        rows = rng.integers(0, n, size=n)
        lam = randomized_penalty_matrix(p, lambda_i, lam_max, cfg.c, rng)
        try:
            S = sample_covariance(data[rows])
            sol = solve_glasso(GlassoProblem(S, lam), cfg.glasso_tol, cfg.glasso_max_iter)
        except NumericError:
            skipped += 1
            continue
        counts += sol.theta.theta != 0.0
    effective = cfg.B - skipped
    if effective == 0:
        raise NumericError("all bootstrap iterations failed")
    if skipped:
        warnings.warn(f"{skipped} of {cfg.B} bootstrap solves failed and were skipped")
    Y = counts / effective
    np.fill_diagonal(Y, 0.0)
    return Y, skipped


def beta_binomial_moments(Y: np.ndarray, B: int):
    """Method-of-moments pooling of per-subject edge frequencies.

    mu is the subject mean; rho is the Beta-Binomial dispersion estimate,
    clamped to [0, 1]. Where mu is exactly 0 or 1 the dispersion is
    undefined; it is reported as 0 and flagged. Returns (mu, rho,
    degenerate_mask).
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 3:
        raise DimensionError("Y must be N x p x p")
    N = Y.shape[0]
    if N < 2:
        raise DomainError("need at least 2 subjects")
    if B < 2:
        raise DomainError("need at least 2 bootstrap iterations")
    mu = Y.mean(axis=0)
    ssq = ((mu[None, :, :] - Y) ** 2).sum(axis=0)
    degenerate = (mu == 0.0) | (mu == 1.0)
    denom = np.where(degenerate, 1.0, mu * (1.0 - mu) * (N - 1))
    rho = (B / (B - 1.0)) * ssq / denom - 1.0 / (B - 1.0)
    rho = np.clip(rho, 0.0, 1.0)
    rho[degenerate] = 0.0
    np.fill_diagonal(mu, 0.0)
    np.fill_diagonal(rho, 0.0)
    np.fill_diagonal(degenerate, False)
    return mu, rho, degenerate


def run_stability(cohort: CohortData, cfg: StabilityConfig, threads: int = 1) -> StabilityResult:
    """StARS + bootstrap per subject, then Beta-Binomial pooling."""
    N = cohort.n_subjects
    if N < 2:
        raise DomainError("the stability approach needs at least 2 subjects")

    def one_subject(i):
        data = cohort.subjects[i]
        lam = stars_select_lambda(data, cfg, _rng(cfg.seed, 1, i))
        Y, skipped = bootstrap_networks(data, lam, cfg, subject=i)
        return lam, Y, skipped

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_subject = list(pool.map(one_subject, range(N)))
    else:
        per_subject = [one_subject(i) for i in range(N)]

    lambdas = tuple(lam for lam, _, _ in per_subject)
    Y = np.stack([y for _, y, _ in per_subject])
    skipped = tuple(s for _, _, s in per_subject)
    mu, rho, degenerate = beta_binomial_moments(Y, cfg.B)
    return StabilityResult(mu, rho, Y, lambdas, degenerate, skipped)
