import numpy as np
import pytest

from mixednet.data import CohortData
from mixednet.errors import DomainError, NumericError
from mixednet.glasso import (GlassoProblem, GlassoSolution, fit_per_subject,
                             fit_pooled, glasso_path, penalty_upper_bound,
                             pooled_covariance, sample_covariance, solve_glasso)
from mixednet.graphs import PrecisionMatrix
from mixednet.simulate import sample_mvn

from oracles import (glasso_coordinate_grid_gap, glasso_kkt_violation,
                     glasso_objective, naive_covariance)


def _penalty_matrix(p, lam):
    full = np.full((p, p), lam)
    np.fill_diagonal(full, 0.0)
    return full


# ------------------------------------------------------- sample covariance

def test_sample_covariance_orthogonal_columns():
    n = 16
    X = np.zeros((n, 2))
    X[: n // 2, 0] = 1.0
    X[n // 2:, 0] = -1.0
    X[::2, 1] = 1.0
    X[1::2, 1] = -1.0
    S = sample_covariance(X)
    assert np.allclose(S, np.eye(2), atol=1e-12)


def test_sample_covariance_constant_rows():
    X = np.tile([1.5, -2.0, 3.0], (5, 1))
    assert np.array_equal(sample_covariance(X), np.zeros((3, 3)))


def test_sample_covariance_matches_naive_oracle():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((10, 3))
    assert np.max(np.abs(sample_covariance(X) - naive_covariance(X))) < 1e-12


def test_sample_covariance_needs_two_rows():
    with pytest.raises(DomainError):
        sample_covariance(np.ones((1, 3)))


# ------------------------------------------------------------ solve_glasso

def test_identity_covariance_gives_identity_precision():
    sol = solve_glasso(GlassoProblem(np.eye(4), 0.1))
    assert np.allclose(sol.theta.theta, np.eye(4), atol=1e-10)
    assert sol.converged


def test_two_node_edge_dies_at_penalty():
    s = 0.35
    S = np.array([[1.0, s], [s, 1.0]])
    sol = solve_glasso(GlassoProblem(S, s * 1.0001))
    assert sol.theta.theta[0, 1] == 0.0
    below = solve_glasso(GlassoProblem(S, s * 0.5))
    assert below.theta.theta[0, 1] != 0.0


def test_kkt_and_local_grid_optimality_p3():
    rng = np.random.default_rng(1)
    for _ in range(5):
        A = rng.standard_normal((40, 3))
        S = sample_covariance(A @ rng.standard_normal((3, 3)))
        S += 0.5 * np.eye(3)
        lam = _penalty_matrix(3, 0.12)
        sol = solve_glasso(GlassoProblem(S, 0.12), tol=1e-9)
        theta = sol.theta.theta
        assert glasso_kkt_violation(S, lam, theta) < 1e-5
        assert glasso_coordinate_grid_gap(S, lam, theta, radius=0.02, steps=41) < 1e-4


def test_support_shrinks_with_penalty():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((60, 5))
    S = sample_covariance(A @ (np.eye(5) + 0.4 * rng.standard_normal((5, 5))))
    lams = np.geomspace(penalty_upper_bound(S), 0.01 * penalty_upper_bound(S), 8)
    sizes = [len(sol.support()) for sol in glasso_path(S, lams)]
    for bigger_lam_size, smaller_lam_size in zip(sizes, sizes[1:]):
        assert bigger_lam_size <= smaller_lam_size
    assert sizes[0] == 0


def test_zero_penalty_recovers_inverse():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((200, 4))
    S = sample_covariance(A) + 0.3 * np.eye(4)
    sol = solve_glasso(GlassoProblem(S, 0.0), tol=1e-10)
    assert np.max(np.abs(sol.theta.theta - np.linalg.inv(S))) < 1e-6


def test_returned_theta_is_pd():
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = int(rng.integers(2, 7))
        A = rng.standard_normal((3 * p, p))
        sol = solve_glasso(GlassoProblem(sample_covariance(A), 0.1))
        np.linalg.cholesky(sol.theta.theta)  # raises if not PD


def test_ridge_repair_on_singular_covariance():
    # rank-deficient S (n < p) must be ridged rather than fail
    rng = np.random.default_rng(5)
    X = rng.standard_normal((3, 6))
    S = sample_covariance(X)
    sol = solve_glasso(GlassoProblem(S, 0.2))
    assert sol.ridged
    np.linalg.cholesky(sol.theta.theta)


def test_elementwise_penalty_respected():
    rng = np.random.default_rng(6)
    base = np.eye(3)
    base[0, 1] = base[1, 0] = 0.4
    base[1, 2] = base[2, 1] = 0.4
    theta = PrecisionMatrix(base)
    S = sample_covariance(sample_mvn(theta, 4000, rng))
    lam = np.zeros((3, 3))
    lam[0, 1] = lam[1, 0] = 10.0  # kill edge (0,1) only
    sol = solve_glasso(GlassoProblem(S, lam))
    assert sol.theta.theta[0, 1] == 0.0
    assert sol.theta.theta[1, 2] != 0.0


def test_problem_validation():
    with pytest.raises(DomainError):
        GlassoProblem(np.eye(3), -0.1)
    with pytest.raises(DomainError):
        GlassoProblem(np.array([[1.0, 0.5], [0.4, 1.0]]), 0.1)


# -------------------------------------------------------------- baselines

def test_fit_pooled_replicated_subject_matches_single(tmp_path):
    rng = np.random.default_rng(7)
    base = np.eye(4)
    base[0, 2] = base[2, 0] = 0.45
    data = sample_mvn(PrecisionMatrix(base), 150, rng)
    single = CohortData.from_arrays([data])
    triple = CohortData.from_arrays([data, data.copy(), data.copy()])
    lam = 0.1
    assert fit_pooled(single, lam).edges == fit_pooled(triple, lam).edges


def test_fit_pooled_high_penalty_empty():
    rng = np.random.default_rng(8)
    cohort = CohortData.from_arrays([rng.standard_normal((50, 4)) for _ in range(3)])
    lam = penalty_upper_bound(pooled_covariance(cohort))
    assert len(fit_pooled(cohort, lam * 1.001)) == 0


def test_fit_per_subject_returns_one_support_per_subject():
    rng = np.random.default_rng(9)
    cohort = CohortData.from_arrays([rng.standard_normal((60, 4)) for _ in range(3)])
    nets = fit_per_subject(cohort, 0.2)
    assert len(nets) == 3
    assert all(n.p == 4 for n in nets)


def test_objective_agrees_with_oracle_evaluation():
    rng = np.random.default_rng(10)
    A = rng.standard_normal((80, 4))
    S = sample_covariance(A) + 0.2 * np.eye(4)
    lam = 0.15
    sol = solve_glasso(GlassoProblem(S, lam), tol=1e-9)
    ours = glasso_objective(S, _penalty_matrix(4, lam), sol.theta.theta)
    direct = glasso_objective(S, _penalty_matrix(4, lam), np.linalg.inv(S))
    assert ours <= direct + 1e-9  # penalized optimum beats the MLE's objective
