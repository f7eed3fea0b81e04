"""Sparse bipartite network inference from observed configurations.

Infers a sparse weighted bipartite network (and the activities of the
hidden variables driving it) from a data matrix, by rotating a truncated
SVD basis so that the loading matrix becomes sparse. Ships with a
synthetic-network simulator, an evaluation harness and a CLI.
"""

from .linalg import TruncatedSvd, truncated_svd
from .pursuit import BasisMatrix, ColumnSolution, PursuitConfig, pursue_column, solve_basis

__version__ = "0.1.0"

__all__ = [
    "BasisMatrix",
    "ColumnSolution",
    "PursuitConfig",
    "TruncatedSvd",
    "pursue_column",
    "solve_basis",
    "truncated_svd",
    "__version__",
]
