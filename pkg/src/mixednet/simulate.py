"""Seeded generation of network cohorts and Gaussian samples.

A cohort is a scale-free population network shared by every subject plus a
random set of variable edges that each subject includes with probability
tau (with freshly drawn weights either way), summed into per-subject
precision matrices and repaired to strict positive definiteness.

All randomness flows through named substreams spawned from the master
seed, so generation is reproducible and order-insensitive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, DomainError, NumericError
from .graphs import EdgeSet, PrecisionMatrix, WeightedNetwork


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass(frozen=True)
class SimConfig:
    # ba_m defaults to 2: the smallest attachment count whose population
    # networks contain triangles at all, so the clustering-coefficient drop
    # from population to subject level is observable (an m=1 tree has
    # coefficient exactly 0).
    p: int
    N: int
    n: int
    e_ran: int
    tau: float
    r: float = 1.0
    ba_m: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.p < 2:
            raise DomainError("need p >= 2 nodes")
        if self.N < 1 or self.n < 2:
            raise DomainError("need N >= 1 subjects and n >= 2 observations")
        if not 0 <= self.e_ran <= self.p * (self.p - 1) // 2:
            raise DomainError("e_ran outside 0..p(p-1)/2")
        if not 0.0 <= self.tau <= 1.0:
            raise DomainError("tau must lie in [0, 1]")
        if self.r <= 0:
            raise DomainError("connectivity strength r must be positive")
        if not 1 <= self.ba_m < self.p:
            raise DomainError("ba_m must satisfy 1 <= ba_m < p")


@dataclass(frozen=True)
class SimTruth:
    """Ground-truth networks and per-subject precision matrices."""

    e_pop: EdgeSet
    e_tilde: EdgeSet
    e_subject: tuple
    theta_pop: WeightedNetwork
    theta_subject: tuple
    precisions: tuple

    @property
    def p(self) -> int:
        return self.e_pop.p

    @property
    def n_subjects(self) -> int:
        return len(self.e_subject)

    def subject_full_edges(self, i: int) -> EdgeSet:
        """Full conditional-independence edges of subject i."""
        return self.e_pop.union(self.e_subject[i])


def gen_barabasi_albert(p: int, ba_m: int, rng) -> EdgeSet:
    """Preferential-attachment graph grown from a complete (ba_m+1)-node seed."""
    if not 1 <= ba_m < p:
        raise DomainError("ba_m must satisfy 1 <= ba_m < p")
    edges = set()
    degree = np.zeros(p)
    seed_nodes = ba_m + 1
    for u in range(seed_nodes):
        for v in range(u + 1, seed_nodes):
            edges.add((u, v))
            degree[u] += 1
            degree[v] += 1
    for new in range(seed_nodes, p):
        weights = degree[:new]
        targets = rng.choice(new, size=ba_m, replace=False, p=weights / weights.sum())
        for t in np.sort(targets):
            t = int(t)
            edges.add((t, new))
            degree[t] += 1
            degree[new] += 1
    return EdgeSet(p, frozenset(edges))


def _pair_from_index(k: int, p: int):
    u = 0
    count = p - 1
    while k >= count:
        k -= count
        u += 1
        count -= 1
    return u, u + 1 + k


def gen_erdos_renyi(p: int, e_ran: int, rng) -> EdgeSet:
    """Uniform sample of exactly e_ran distinct unordered pairs."""
    total = p * (p - 1) // 2
    if not 0 <= e_ran <= total:
        raise DomainError("e_ran outside 0..p(p-1)/2")
    picks = rng.choice(total, size=e_ran, replace=False)
    return EdgeSet(p, frozenset(_pair_from_index(int(k), p) for k in picks))


def sample_edge_weights(edges: EdgeSet, r: float, rng) -> WeightedNetwork:
    """Weights drawn uniformly from [-r, -r/2] u [r/2, r], symmetric placement."""
    if r <= 0:
        raise DomainError("connectivity strength r must be positive")
    w = np.zeros((edges.p, edges.p))
    for u, v in sorted(edges.edges):
        mag = rng.uniform(r / 2.0, r)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        w[u, v] = w[v, u] = sign * mag
    return WeightedNetwork(w)


def pd_repair(theta: np.ndarray, safety: float = 1.1, max_tries: int = 30) -> PrecisionMatrix:
    """Rescale off-diagonals of a unit-diagonal matrix until strictly PD.

    Each off-diagonal entry is divided by safety * (row sum of absolute
    off-diagonals); rows with a zero sum stay unchanged. The result is
    averaged with its transpose. The safety factor starts above 1 because
    dividing exactly by the row sum only guarantees semidefiniteness, and
    grows by 0.1 until the smallest eigenvalue is positive.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    if theta.shape != (p, p) or not np.allclose(theta, theta.T):
        raise DimensionError("pd_repair expects a square symmetric matrix")
    if not np.allclose(np.diag(theta), 1.0):
        raise DomainError("pd_repair expects a unit diagonal")
    off = theta.copy()
    np.fill_diagonal(off, 0.0)
    rowsums = np.abs(off).sum(axis=1)
    s = safety
    for _ in range(max_tries):
        scale = np.where(rowsums > 0.0, s * rowsums, 1.0)
        scaled = off / scale[:, None]
        candidate = (scaled + scaled.T) / 2.0
        np.fill_diagonal(candidate, 1.0)
        if np.linalg.eigvalsh(candidate)[0] > 0.0:
            return PrecisionMatrix(candidate)
        s += 0.1
    raise NumericError("pd_repair failed to reach positive definiteness")


def sample_mvn(precision: PrecisionMatrix, n: int, rng) -> np.ndarray:
    """Draw n rows from N(0, theta^{-1}) via the precision Cholesky factor."""
    try:
        L = np.linalg.cholesky(precision.theta)
    except np.linalg.LinAlgError as exc:
        raise NumericError("precision matrix is not positive definite") from exc
    z = rng.standard_normal((n, precision.p))
    return solve_triangular(L.T, z.T, lower=False).T


def gen_cohort(cfg: SimConfig) -> SimTruth:
    """Generate population, variable and per-subject truth networks."""
    e_pop = gen_barabasi_albert(cfg.p, cfg.ba_m, _rng(cfg.seed, 0))
    theta_pop = sample_edge_weights(e_pop, cfg.r, _rng(cfg.seed, 1))
    e_tilde = gen_erdos_renyi(cfg.p, cfg.e_ran, _rng(cfg.seed, 2))
    subject_edges = []
    subject_nets = []
    precisions = []
    for i in range(cfg.N):
        rng_i = _rng(cfg.seed, 10, i)
        included = frozenset(e for e in sorted(e_tilde.edges) if rng_i.random() < cfg.tau)
        es = EdgeSet(cfg.p, included)
        ws = sample_edge_weights(es, cfg.r, rng_i) if included else WeightedNetwork(np.zeros((cfg.p, cfg.p)))
        subject_edges.append(es)
        subject_nets.append(ws)
        combined = theta_pop.weights + ws.weights + np.eye(cfg.p)
        precisions.append(pd_repair(combined))
    return SimTruth(e_pop, e_tilde, tuple(subject_edges), theta_pop,
                    tuple(subject_nets), tuple(precisions))


def sample_cohort_data(truth: SimTruth, n: int, seed: int) -> list:
    """Sample n observations per subject on independent named substreams."""
    return [sample_mvn(truth.precisions[i], n, _rng(seed, 20, i))
            for i in range(truth.n_subjects)]


def simulate_cohort(cfg: SimConfig):
    """Convenience wrapper: (truth, raw per-subject data matrices)."""
    truth = gen_cohort(cfg)
    return truth, sample_cohort_data(truth, cfg.n, cfg.seed)


def gen_component_cohort(p: int, N: int = 3, seed: int = 0, ba_m: int = 1,
                         r: float = 1.0) -> SimTruth:
    """Block-structured cohort: 10 disconnected scale-free sub-networks.

    Eight blocks are shared by all three subjects, one is present in the
    first two subjects only, and one is present only in the first subject.
    """
    if p % 10 != 0:
        raise DomainError("component cohorts need p divisible by 10")
    if N != 3:
        raise DomainError("component cohorts are defined for exactly 3 subjects")
    q = p // 10
    if q < 2:
        raise DomainError("components need at least 2 nodes each")
    block_edges = []
    block_weights = []
    for k in range(10):
        rng_k = _rng(seed, 30, k)
        local = gen_barabasi_albert(q, min(ba_m, q - 1), rng_k)
        shifted = frozenset((u + k * q, v + k * q) for u, v in local.edges)
        es = EdgeSet(p, shifted)
        block_edges.append(es)
        block_weights.append(sample_edge_weights(es, r, rng_k).weights)

    membership = [list(range(10)), list(range(9)), list(range(8))]
    shared = frozenset().union(*(block_edges[k].edges for k in range(8)))
    e_pop = EdgeSet(p, shared)
    e_tilde = EdgeSet(p, block_edges[8].edges | block_edges[9].edges)
    theta_pop = WeightedNetwork(sum(block_weights[k] for k in range(8)))

    subject_edges, subject_nets, precisions = [], [], []
    for i in range(3):
        extra = [k for k in membership[i] if k >= 8]
        edges_i = frozenset().union(*(block_edges[k].edges for k in extra)) if extra else frozenset()
        w_i = sum((block_weights[k] for k in extra), np.zeros((p, p)))
        subject_edges.append(EdgeSet(p, edges_i))
        subject_nets.append(WeightedNetwork(w_i))
        combined = theta_pop.weights + w_i + np.eye(p)
        precisions.append(pd_repair(combined))
    return SimTruth(e_pop, e_tilde, tuple(subject_edges), theta_pop,
                    tuple(subject_nets), tuple(precisions))
