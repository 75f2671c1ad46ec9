"""Graphical lasso with scalar or elementwise penalties.

Used directly as the pooled-population baseline and per-subject baseline,
and as the inner estimator of the bootstrap stability procedure. The block
coordinate descent shares the penalized coordinate-descent kernel with the
rest of the package.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import glasso_solve
from .errors import DimensionError, DomainError, NumericError
from .graphs import EdgeSet, PrecisionMatrix

RIDGE_EPS = 1e-8
RIDGE = 1e-4


@dataclass(frozen=True)
class GlassoProblem:
    """-log det T + trace(S T) + ||penalty o T||_1 over symmetric PD T."""

    sample_cov: np.ndarray
    penalty: object  # scalar or symmetric p x p matrix

    def __post_init__(self):
        S = np.asarray(self.sample_cov, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionError("sample covariance must be square")
        if not np.allclose(S, S.T, atol=1e-10):
            raise DomainError("sample covariance must be symmetric")
        object.__setattr__(self, "sample_cov", (S + S.T) / 2.0)
        lam = self.penalty
        if np.isscalar(lam):
            if lam < 0:
                raise DomainError("scalar penalty must be nonnegative")
            # scalar convention: off-diagonals penalized, diagonal free
            full = np.full_like(S, float(lam))
            np.fill_diagonal(full, 0.0)
        else:
            full = np.asarray(lam, dtype=float)
            if full.shape != S.shape:
                raise DimensionError("penalty matrix shape must match the covariance")
            if not np.allclose(full, full.T, atol=1e-12):
                raise DomainError("penalty matrix must be symmetric")
            if np.any(full < 0):
                raise DomainError("penalty matrix must be nonnegative")
        object.__setattr__(self, "penalty_matrix", np.ascontiguousarray(full))

    @property
    def p(self) -> int:
        return self.sample_cov.shape[0]


@dataclass(frozen=True)
class GlassoSolution:
    theta: PrecisionMatrix
    converged: bool
    iterations: int
    ridged: bool = False

    def support(self) -> EdgeSet:
        return EdgeSet.from_mask(self.theta.theta != 0.0)


def sample_covariance(data: np.ndarray) -> np.ndarray:
    """(1/n) X'X after column centering."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DomainError("sample covariance needs an n x p matrix with n >= 2")
    if not np.all(np.isfinite(X)):
        raise NumericError("data contains non-finite values")
    Xc = X - X.mean(axis=0, keepdims=True)
    return (Xc.T @ Xc) / X.shape[0]


def _ridge_if_needed(S):
    if np.linalg.eigvalsh(S)[0] < RIDGE_EPS:
        return S + RIDGE * np.eye(S.shape[0]), True
    return S, False


def solve_glasso(prob: GlassoProblem, tol: float = 1e-5, max_iter: int = 200) -> GlassoSolution:
    """Block coordinate descent; returns a symmetric PD precision estimate.

    Near-singular covariances get a 1e-4 ridge (flagged in the solution).
    The column-wise reconstruction is averaged with its transpose, which
    keeps the support exactly symmetric because the solver produces exact
    zeros.
    """
    S, ridged = _ridge_if_needed(prob.sample_cov)
    theta, W, cycles, converged = glasso_solve(
        np.ascontiguousarray(S), prob.penalty_matrix, tol, max_iter, 1e-9, 2000)
    theta = (theta + theta.T) / 2.0
    try:
        np.linalg.cholesky(theta)
    except np.linalg.LinAlgError as exc:
        raise NumericError("glasso produced a non-PD precision estimate") from exc
    return GlassoSolution(PrecisionMatrix(theta), bool(converged), int(cycles), ridged)


def glasso_path(S: np.ndarray, lambdas, tol: float = 1e-5, max_iter: int = 200) -> list:
    """Independent solves over a penalty grid; returns GlassoSolutions.

    Grids are usually descending; each solve is cheap enough at desk scale
    that the solutions stay independent rather than sharing state.
    """
    return [solve_glasso(GlassoProblem(S, lam), tol, max_iter) for lam in lambdas]


def penalty_upper_bound(S: np.ndarray) -> float:
    """Smallest scalar penalty giving the empty (diagonal) glasso graph."""
    off = np.abs(np.asarray(S, dtype=float)).copy()
    np.fill_diagonal(off, 0.0)
    return float(off.max())


def pooled_covariance(cohort) -> np.ndarray:
    """Sample covariance of all subjects' rows stacked and re-centered."""
    stacked = np.vstack(cohort.subjects)
    return sample_covariance(stacked)


def fit_pooled(cohort, lam: float, tol: float = 1e-5, max_iter: int = 200) -> EdgeSet:
    """Concatenate all subjects, fit one glasso, return its support."""
    return solve_glasso(GlassoProblem(pooled_covariance(cohort), lam), tol, max_iter).support()


def fit_per_subject(cohort, lam: float, tol: float = 1e-5, max_iter: int = 200) -> list:
    """Independent glasso per subject at a shared penalty; list of supports."""
    out = []
    for x in cohort.subjects:
        sol = solve_glasso(GlassoProblem(sample_covariance(x), lam), tol, max_iter)
        out.append(sol.support())
    return out
