"""Joint estimation of population, subject-specific and highly variable
edges of Gaussian graphical models from replicated multivariate time series.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .graphs import (
    EdgeSet,
    NodeSet,
    PrecisionMatrix,
    WeightedNetwork,
    clustering_coefficient,
    combine_neighborhoods,
    support_of,
)
from .lasso import LassoProblem, LassoSolution, soft_threshold, solve_lasso

__all__ = [
    "BACKEND",
    "EdgeSet",
    "NodeSet",
    "PrecisionMatrix",
    "WeightedNetwork",
    "clustering_coefficient",
    "combine_neighborhoods",
    "support_of",
    "LassoProblem",
    "LassoSolution",
    "soft_threshold",
    "solve_lasso",
]
