"""Penalty reparameterization, cross-validation and edge-recovery metrics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import CohortData
from .errors import DimensionError, DomainError
from .estimator import MnsConfig, fit_path
from .graphs import EdgeSet


@dataclass(frozen=True)
class AlphaLambda:
    """Single-knob penalty parameterization: lam1 = alpha*lam, lam2 = sqrt(2)*(1-alpha)*lam."""

    alpha: float
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError("alpha must lie in [0, 1]")
        if self.lam < 0:
            raise DomainError("lambda must be nonnegative")


def to_penalties(al: AlphaLambda) -> tuple:
    return al.alpha * al.lam, math.sqrt(2.0) * (1.0 - al.alpha) * al.lam


def from_penalties(lambda1: float, lambda2: float) -> AlphaLambda:
    """Inverse of to_penalties (defined for lambda1 + lambda2 > 0)."""
    scaled2 = lambda2 / math.sqrt(2.0)
    total = lambda1 + scaled2
    if total == 0:
        raise DomainError("cannot invert the parameterization at lambda1 = lambda2 = 0")
    return AlphaLambda(lambda1 / total, total)


def make_lambda_grid(lam_max: float, count: int = 25, min_ratio: float = 0.01) -> np.ndarray:
    """Descending log-spaced grid in [min_ratio * lam_max, lam_max]."""
    if lam_max <= 0 or count < 1 or not 0 < min_ratio <= 1:
        raise DomainError("invalid grid parameters")
    if count == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, min_ratio * lam_max, count)


def tpr_fpr(estimated: EdgeSet, truth: EdgeSet) -> tuple:
    """Edge-recovery rates; degenerate truths get the documented conventions."""
    if estimated.p != truth.p:
        raise DimensionError("estimated and truth edge sets disagree on p")
    total = truth.p * (truth.p - 1) // 2
    n_true = len(truth)
    tp = len(estimated.edges & truth.edges)
    fp = len(estimated.edges - truth.edges)
    if n_true == 0:
        warnings.warn("empty truth: TPR reported as 1 by convention")
        tpr = 1.0
    else:
        tpr = tp / n_true
    if n_true == total:
        warnings.warn("complete-graph truth: FPR reported as 0 by convention")
        fpr = 0.0
    else:
        fpr = fp / (total - n_true)
    return tpr, fpr


def _micro_counts(estimates, truths):
    tp = fp = pos = neg = 0
    for est, tru in zip(estimates, truths):
        if est.p != tru.p:
            raise DimensionError("estimated and truth edge sets disagree on p")
        total = tru.p * (tru.p - 1) // 2
        tp += len(est.edges & tru.edges)
        fp += len(est.edges - tru.edges)
        pos += len(tru)
        neg += total - len(tru)
    tpr = tp / pos if pos else 1.0
    fpr = fp / neg if neg else 0.0
    return tpr, fpr


@dataclass(frozen=True)
class RocCurve:
    points: tuple  # (fpr, tpr) sorted by fpr
    auc: float


def _finish_curve(raw_points) -> RocCurve:
    pts = sorted(set(raw_points) | {(0.0, 0.0), (1.0, 1.0)})
    xs = np.array([a for a, _ in pts])
    ys = np.array([b for _, b in pts])
    return RocCurve(tuple(pts), float(np.trapezoid(ys, xs)))


def roc_sweep(fit_fn, grid, truth) -> RocCurve:
    """ROC over a penalty grid.

    ``fit_fn(lam)`` returns an EdgeSet (against an EdgeSet truth) or a list
    of per-subject EdgeSets (against a list of truths; confusion counts are
    pooled across subjects before rates are formed). Anchors (0,0) and
    (1,1) are always included.
    """
    if len(grid) == 0:
        raise DomainError("grid must be nonempty")
    pts = []
    for lam in grid:
        est = fit_fn(lam)
        if isinstance(est, EdgeSet):
            tpr, fpr = tpr_fpr(est, truth)
        else:
            tpr, fpr = _micro_counts(est, truth)
        pts.append((fpr, tpr))
    return _finish_curve(pts)


def roc_from_networks(networks, truth) -> RocCurve:
    """ROC from precomputed per-grid-point networks (same pooling rules)."""
    return roc_sweep(lambda k: networks[k], range(len(networks)), truth)


def score_roc(scores: np.ndarray, truth: EdgeSet) -> RocCurve:
    """ROC of a symmetric edge-score matrix swept over all thresholds."""
    p = truth.p
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (p, p):
        raise DimensionError("score matrix shape must match truth")
    iu = np.triu_indices(p, k=1)
    vals = scores[iu]
    labels = truth.to_mask()[iu]
    order = np.argsort(-vals, kind="stable")
    vals, labels = vals[order], labels[order]
    pos = int(labels.sum())
    neg = labels.size - pos
    pts = []
    tp = fp = 0
    k = 0
    while k < labels.size:
        # advance over ties so each threshold contributes one point
        v = vals[k]
        while k < labels.size and vals[k] == v:
            tp += int(labels[k])
            fp += int(not labels[k])
            k += 1
        pts.append((fp / neg if neg else 0.0, tp / pos if pos else 1.0))
    return _finish_curve(pts)


@dataclass(frozen=True)
class CvReport:
    grid: tuple  # AlphaLambda entries
    mse: np.ndarray  # mean held-out squared error per grid entry
    best: AlphaLambda

    def __post_init__(self):
        if len(self.grid) != len(self.mse):
            raise DimensionError("one MSE per grid entry required")


def _fold_blocks(n: int, K: int):
    return np.array_split(np.arange(n), K)


def cross_validate(cohort: CohortData, grid, K: int, cfg: MnsConfig,
                   threads: int = 1) -> CvReport:
    """K-fold CV of the mixed-model fit over (alpha, lambda) grid entries.

    Observations are folded within each subject in contiguous time blocks.
    Held-out rows are predicted with the training-fit fixed effects and the
    training-fit BLUPs of the same subject (no re-estimation on test rows);
    the report's MSE averages squared errors over all held-out cells.
    """
    grid = list(grid)
    if K < 2:
        raise DomainError("need at least 2 folds")
    if not grid:
        raise DomainError("grid must be nonempty")
    if any(x.shape[0] < K for x in cohort.subjects):
        raise DomainError("every subject needs at least K observations")

    # fit_path wants a fixed alpha per pass; group grid entries by alpha
    by_alpha: dict = {}
    for gi, al in enumerate(grid):
        by_alpha.setdefault(al.alpha, []).append(gi)

    p = cohort.p
    sse = np.zeros(len(grid))
    count = np.zeros(len(grid))
    blocks = [_fold_blocks(x.shape[0], K) for x in cohort.subjects]
    for k in range(K):
        train_arrays, test_arrays = [], []
        for x, blk in zip(cohort.subjects, blocks):
            mask = np.ones(x.shape[0], dtype=bool)
            mask[blk[k]] = False
            train_arrays.append(x[mask])
            test_arrays.append(x[~mask])
        train = CohortData.from_arrays(train_arrays, cohort.node_set,
                                       cohort.subject_ids, center=False)
        for alpha, gidx in by_alpha.items():
            order = sorted(gidx, key=lambda gi: -grid[gi].lam)
            pairs = [to_penalties(grid[gi]) for gi in order]
            results = fit_path(train, pairs, cfg, threads)
            for gi, res in zip(order, results):
                for i, xt in enumerate(test_arrays):
                    if xt.shape[0] == 0:
                        continue
                    gamma = np.zeros((p, p))
                    for fit in res.node_fits:
                        v = fit.node
                        coef = fit.beta + fit.sigma_re * fit.blups[i]
                        gamma[v, :v] = coef[:v]
                        gamma[v, v + 1:] = coef[v:]
                    resid = xt - xt @ gamma.T
                    sse[gi] += float(np.sum(resid * resid))
                    count[gi] += resid.size
    mse = sse / count
    best = grid[int(np.argmin(mse))]
    return CvReport(tuple(grid), mse, best)
