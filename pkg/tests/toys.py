"""Tiny sign-flipping cohort used by the qualitative estimator tests.

Five nodes, four subjects, eight observations each: four stable edges (a
triangle over nodes 0-2 plus a tail to node 3) and one edge to node 4
whose sign flips between the two subject groups. Node 4's only edge is
the flipping one, so the PD rescaling leaves it strong enough to detect
at this tiny sample size. A correct fit puts the flipping edge in the
variance network and the stable edges in the population network.
"""
import numpy as np

from mixednet.data import CohortData
from mixednet.estimator import MnsConfig, fit_all, penalty_max
from mixednet.simulate import pd_repair, sample_mvn
from mixednet.tuning import AlphaLambda, to_penalties

STABLE_EDGES = ((0, 1), (0, 2), (1, 2), (2, 3))
FLIP_EDGE = (3, 4)
LAMBDA_FRACTION = 0.02
ALPHA = 0.25


def flip_cohort(seed: int, n: int = 8, n_subjects: int = 4, weight: float = 0.9):
    base = np.eye(5)
    for k, (u, v) in enumerate(STABLE_EDGES):
        w = weight if k % 2 == 0 else -weight
        base[u, v] = base[v, u] = w
    arrays = []
    for i in range(n_subjects):
        theta = base.copy()
        sign = 1.0 if i < n_subjects // 2 else -1.0
        u, v = FLIP_EDGE
        theta[u, v] = theta[v, u] = sign * weight
        prec = pd_repair(theta)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(90, i)))
        arrays.append(sample_mvn(prec, n, rng))
    return CohortData.from_arrays(arrays)


def flip_fit(cohort, lam_fraction: float = LAMBDA_FRACTION, alpha: float = ALPHA):
    lam = lam_fraction * penalty_max(cohort) / alpha
    lam1, lam2 = to_penalties(AlphaLambda(alpha, lam))
    return fit_all(cohort, MnsConfig(lam1, lam2))


def flip_success(result) -> bool:
    """Stable edges recovered in the population net, flip edge in the variance net."""
    pop = result.population_edges().edges
    var = result.variance_edges().edges
    return all(e in pop for e in STABLE_EDGES) and FLIP_EDGE in var
