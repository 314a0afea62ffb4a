"""Coarsening-guided partition-wise graph filtering."""

__version__ = "0.1.0"

from .coarsening import CoarseningOperator, Partition, coarsen, coarsening_operator, rsa_constant
from .errors import PartfiltError
from .filtering import PolyBasis, partitionwise_filter, propagate_basis
from .graph import Graph, from_edges, load_graph, normalized_laplacian
from .training import TrainConfig, evaluate, train

__all__ = [
    "CoarseningOperator",
    "Graph",
    "PartfiltError",
    "Partition",
    "PolyBasis",
    "TrainConfig",
    "coarsen",
    "coarsening_operator",
    "evaluate",
    "from_edges",
    "load_graph",
    "normalized_laplacian",
    "partitionwise_filter",
    "propagate_basis",
    "rsa_constant",
    "train",
]
