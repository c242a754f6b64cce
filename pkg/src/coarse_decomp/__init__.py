"""Decomposition witnesses, property-A kernels and straight chains on finite metric spaces."""

from .errors import CoarseDecompError
from .metric import (
    FiniteMetricSpace,
    Subspace,
    SubspaceFamily,
    bounded_geometry_profile,
    check_r_disjoint,
    diameter,
    gap,
    neighborhood,
)
from .spaces import (
    GroupPresentationPreset,
    build_binary_tree,
    build_cayley_ball,
    build_cycle,
    build_graph_metric,
    build_grid_box,
    build_path,
    build_product,
)

__all__ = [
    "CoarseDecompError", "FiniteMetricSpace", "Subspace", "SubspaceFamily",
    "bounded_geometry_profile", "check_r_disjoint", "diameter", "gap", "neighborhood",
    "GroupPresentationPreset", "build_binary_tree", "build_cayley_ball", "build_cycle",
    "build_graph_metric", "build_grid_box", "build_path", "build_product",
]

__version__ = "0.1.0"
