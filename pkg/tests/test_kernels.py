"""Backend equivalence: the njit kernels and the vectorized numpy fallbacks
must solve the same problems to solver tolerance."""
import numpy as np
import pytest

from mixednet import _kernels


def _have_numba():
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


needs_numba = pytest.mark.skipif(not _have_numba(), reason="numba not installed")


def _random_problem(rng, n, q):
    X = rng.standard_normal((n, q))
    y = rng.standard_normal(n)
    G = np.ascontiguousarray(X.T @ X)
    c = np.ascontiguousarray(X.T @ y)
    w = rng.uniform(0.0, 0.8, size=q)
    mask = rng.random(q) < 0.4
    return G, c, w, mask


@needs_numba
def test_cd_backends_agree():
    numba_cd, _ = _kernels._build_numba_backend()
    rng = np.random.default_rng(0)
    for _ in range(20):
        G, c, w, mask = _random_problem(rng, 25, 6)
        b1 = np.zeros(6)
        b2 = np.zeros(6)
        numba_cd(G, c, w, mask, b1, 1e-10, 10_000)
        _kernels._cd_solve_numpy(G, c, w, mask, b2, 1e-10, 10_000)
        assert np.allclose(b1, b2, atol=1e-8)
        assert np.array_equal(b1 == 0.0, b2 == 0.0)


@needs_numba
def test_glasso_backends_agree():
    _, numba_gl = _kernels._build_numba_backend()
    rng = np.random.default_rng(1)
    for _ in range(10):
        p = int(rng.integers(3, 8))
        A = rng.standard_normal((3 * p, p))
        S = np.ascontiguousarray(A.T @ A / (3 * p))
        lam = np.full((p, p), 0.15)
        np.fill_diagonal(lam, 0.0)
        t1, W1, c1, conv1 = numba_gl(S, lam, 1e-7, 300, 1e-10, 5000)
        t2, W2, c2, conv2 = _kernels._glasso_solve_numpy(S, lam, 1e-7, 300, 1e-10, 5000)
        assert conv1 and conv2
        assert np.allclose(t1, t2, atol=1e-6)
        assert np.allclose(W1, W2, atol=1e-8)


def test_zero_gram_column_gets_zero_coefficient():
    # a zero design column must not produce a nonzero coefficient or a NaN
    G = np.diag([2.0, 0.0, 1.0])
    c = np.array([1.0, 3.0, -0.5])
    c[1] = 0.0  # zero column implies zero inner product too
    w = np.zeros(3)
    beta = np.ones(3)
    _kernels.cd_solve(G, c, w, np.zeros(3, dtype=np.bool_), beta, 1e-10, 100)
    assert beta[1] == 0.0
    assert np.all(np.isfinite(beta))


def test_backend_name_exported():
    assert _kernels.BACKEND in ("numba", "numpy")
