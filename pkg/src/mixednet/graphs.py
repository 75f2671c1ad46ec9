"""Graph containers, AND/OR symmetrization and the clustering coefficient.

All types are immutable after construction and all operations are pure, so
they are safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class NodeSet:
    """Ordered node labels for a graph on p >= 2 nodes."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise DomainError("a node set needs at least 2 nodes")
        if len(set(self.labels)) != len(self.labels):
            raise DomainError("node labels must be unique")
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def p(self) -> int:
        return len(self.labels)

    @classmethod
    def default(cls, p: int) -> "NodeSet":
        width = len(str(p - 1))
        return cls(tuple(f"v{i:0{width}d}" for i in range(p)))


def _canonical_pairs(edges, p):
    out = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise DomainError(f"self-loop ({u},{v}) not allowed")
        if not (0 <= u < p and 0 <= v < p):
            raise DimensionError(f"edge ({u},{v}) outside node range 0..{p - 1}")
        out.add((u, v) if u < v else (v, u))
    return frozenset(out)


@dataclass(frozen=True)
class EdgeSet:
    """Undirected, unweighted graph: canonical (min,max) pairs over p nodes."""

    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "edges", _canonical_pairs(self.edges, self.p))

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, pair) -> bool:
        u, v = pair
        return ((u, v) if u < v else (v, u)) in self.edges

    def union(self, other: "EdgeSet") -> "EdgeSet":
        if other.p != self.p:
            raise DimensionError("cannot union edge sets with different p")
        return EdgeSet(self.p, self.edges | other.edges)

    def to_mask(self) -> np.ndarray:
        """Boolean p x p adjacency matrix (symmetric, zero diagonal)."""
        m = np.zeros((self.p, self.p), dtype=bool)
        for u, v in self.edges:
            m[u, v] = m[v, u] = True
        return m

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "EdgeSet":
        mask = np.asarray(mask)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise DimensionError("adjacency mask must be square")
        iu, ju = np.nonzero(np.triu(mask, k=1))
        return cls(mask.shape[0], frozenset(zip(iu.tolist(), ju.tolist())))


@dataclass(frozen=True)
class WeightedNetwork:
    """Symmetric p x p edge-weight matrix with an exactly zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError("weights must be a square matrix")
        if not np.array_equal(w, w.T):
            raise DomainError("weights must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise DomainError("weight matrix diagonal must be exactly zero")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def p(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class PrecisionMatrix:
    """Symmetric precision matrix; PD is established by the producer (pd_repair)."""

    theta: np.ndarray

    def __post_init__(self):
        t = np.array(self.theta, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise DimensionError("theta must be a square matrix")
        if not np.allclose(t, t.T, rtol=0.0, atol=1e-12):
            raise DomainError("theta must be symmetric")
        t = (t + t.T) / 2.0
        t.setflags(write=False)
        object.__setattr__(self, "theta", t)

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.theta)[0])


def combine_neighborhoods(per_node_supports, rule: str) -> EdgeSet:
    """Merge directed per-node supports into an undirected edge set.

    ``per_node_supports[v]`` is the set of nodes selected as predictors of
    node v. Under the OR rule an edge (u,v) needs one direction selected,
    under AND it needs both.
    """
    p = len(per_node_supports)
    if rule not in ("and", "or"):
        raise DomainError(f"rule must be 'and' or 'or', got {rule!r}")
    supports = []
    for v, sup in enumerate(per_node_supports):
        sup = set(int(u) for u in sup)
        if v in sup:
            raise DomainError(f"support of node {v} contains itself")
        if any(u < 0 or u >= p for u in sup):
            raise DimensionError(f"support of node {v} references nodes outside 0..{p - 1}")
        supports.append(sup)
    edges = set()
    for v in range(p):
        for u in supports[v]:
            if rule == "or" or v in supports[u]:
                edges.add((min(u, v), max(u, v)))
    return EdgeSet(p, frozenset(edges))


def clustering_coefficient(net: EdgeSet) -> float:
    """Average local clustering coefficient of an undirected graph.

    Nodes of degree < 2 contribute 0 (they are averaged in, not excluded),
    so the statistic stays defined on sparse graphs.
    """
    p = net.p
    if p < 3:
        raise DomainError("clustering coefficient needs p >= 3 nodes")
    adj = net.to_mask()
    deg = adj.sum(axis=1)
    total = 0.0
    for v in range(p):
        d = int(deg[v])
        if d < 2:
            continue
        nbrs = np.nonzero(adj[v])[0]
        closed = int(adj[np.ix_(nbrs, nbrs)].sum()) // 2
        total += closed / (d * (d - 1) / 2.0)
    return total / p


def support_of(net: WeightedNetwork, tol: float = 0.0) -> EdgeSet:
    """Edges whose absolute weight exceeds tol (default 0: exact nonzeros)."""
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    return EdgeSet.from_mask(np.abs(net.weights) > tol)


def write_edge_tsv(path, edges, node_set: NodeSet, weights: np.ndarray | None = None):
    """Write an edge list as TSV: node_u_label, node_v_label, weight.

    Rows are in canonical (min,max) lexicographic index order with LF line
    endings. Unweighted edges get weight 1.0.
    """
    if isinstance(edges, WeightedNetwork):
        weights = edges.weights
        edges = support_of(edges)
    if edges.p != node_set.p:
        raise DimensionError("edge set and node set disagree on p")
    lines = []
    for u, v in sorted(edges.edges):
        w = 1.0 if weights is None else float(weights[u, v])
        lines.append(f"{node_set.labels[u]}\t{node_set.labels[v]}\t{w!r}\n")
    with open(path, "w", newline="") as fh:
        fh.writelines(lines)


def read_edge_tsv(path, node_set: NodeSet) -> tuple[EdgeSet, np.ndarray]:
    """Read a TSV edge list back into (EdgeSet, weight matrix)."""
    index = {lab: i for i, lab in enumerate(node_set.labels)}
    p = node_set.p
    w = np.zeros((p, p))
    edges = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DomainError(f"{path}:{lineno}: expected 3 tab-separated columns")
            a, b, val = parts
            if a not in index or b not in index:
                raise DimensionError(f"{path}:{lineno}: unknown node label {a!r} or {b!r}")
            u, v = index[a], index[b]
            w[u, v] = w[v, u] = float(val)
            edges.add((min(u, v), max(u, v)))
    return EdgeSet(p, frozenset(edges)), w
