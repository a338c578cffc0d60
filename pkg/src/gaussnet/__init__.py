"""Overflow exponents for acyclic networks of queues with Gaussian inputs."""

from .errors import GaussNetError, NumericalError, ValidationError
from .kernel import IncrementSpec, MfBmKernel, cov_barA, gram_matrix
from .network import (
    Network,
    NodeAggregates,
    ValidationReport,
    enumerate_paths,
    node_aggregates,
    path_weight,
    validate_network,
)

__all__ = [
    "GaussNetError",
    "IncrementSpec",
    "MfBmKernel",
    "Network",
    "NodeAggregates",
    "NumericalError",
    "ValidationError",
    "ValidationReport",
    "cov_barA",
    "enumerate_paths",
    "gram_matrix",
    "node_aggregates",
    "path_weight",
    "validate_network",
]
