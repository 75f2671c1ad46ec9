"""Weighted lasso with optional per-coordinate nonnegativity constraints.

This is the shared computational kernel: the mixed-model M-step and the
glasso column subproblems both reduce to it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import cd_solve
from .errors import DimensionError, DomainError, NumericError


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if gamma < 0:
        raise DomainError("soft threshold gamma must be nonnegative")
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


@dataclass(frozen=True)
class LassoProblem:
    """0.5*||y - X b||^2 + sum_j w_j |b_j|, with b_j >= 0 where masked."""

    design: np.ndarray
    response: np.ndarray
    penalty_weights: np.ndarray
    nonneg_mask: np.ndarray = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.design, dtype=float)
        y = np.ascontiguousarray(self.response, dtype=float)
        w = np.ascontiguousarray(self.penalty_weights, dtype=float)
        if X.ndim != 2:
            raise DimensionError("design must be 2-D")
        n, q = X.shape
        if y.shape != (n,):
            raise DimensionError(f"response must have shape ({n},), got {y.shape}")
        if w.shape != (q,):
            raise DimensionError(f"penalty_weights must have shape ({q},), got {w.shape}")
        if np.any(w < 0):
            raise DomainError("penalty weights must be nonnegative")
        mask = self.nonneg_mask
        mask = np.zeros(q, dtype=np.bool_) if mask is None else np.ascontiguousarray(mask, dtype=np.bool_)
        if mask.shape != (q,):
            raise DimensionError(f"nonneg_mask must have shape ({q},), got {mask.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
            raise NumericError("lasso problem contains non-finite values")
        for name, val in (("design", X), ("response", y), ("penalty_weights", w), ("nonneg_mask", mask)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def q(self) -> int:
        return self.design.shape[1]

    def objective(self, beta: np.ndarray) -> float:
        r = self.response - self.design @ beta
        return 0.5 * float(r @ r) + float(self.penalty_weights @ np.abs(beta))


@dataclass(frozen=True)
class LassoSolution:
    coefficients: np.ndarray
    objective: float
    iterations: int
    converged: bool


def solve_lasso(prob: LassoProblem, tol: float = 1e-6, max_iter: int = 10_000,
                warm_start: np.ndarray | None = None) -> LassoSolution:
    """Cyclic coordinate descent with Gram-matrix residual updates.

    Soft-thresholding produces exact zeros; nonneg-masked coordinates are
    clamped at zero after the threshold. Convergence is declared when the
    largest coefficient change in a full sweep drops below ``tol``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    G = prob.design.T @ prob.design
    c = prob.design.T @ prob.response
    beta = np.zeros(prob.q) if warm_start is None else np.array(warm_start, dtype=float)
    if beta.shape != (prob.q,):
        raise DimensionError("warm start has wrong length")
    iters, converged = cd_solve(np.ascontiguousarray(G), c, prob.penalty_weights,
                                prob.nonneg_mask, beta, tol, max_iter)
    beta[prob.nonneg_mask & (beta < 0)] = 0.0
    return LassoSolution(beta, prob.objective(beta), int(iters), bool(converged))


def lasso_max_penalty(design: np.ndarray, response: np.ndarray) -> float:
    """Smallest uniform weight at which the lasso solution is all zero."""
    return float(np.max(np.abs(design.T @ response)))
