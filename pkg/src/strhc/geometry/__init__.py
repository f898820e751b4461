"""Polytope calculus in halfspace representation."""
from .polytope import (
    TOL,
    Polytope,
    affine_image,
    chebyshev_center,
    contains,
    contains_points,
    intersect,
    is_empty,
    is_singleton,
    is_subset,
    minkowski_sum,
    pontryagin_diff,
    pontryagin_diff_image,
    project,
    remove_redundancy,
    support,
    support_many,
    vertices_2d,
    volume,
)

__all__ = [
    "TOL",
    "Polytope",
    "affine_image",
    "chebyshev_center",
    "contains",
    "contains_points",
    "intersect",
    "is_empty",
    "is_singleton",
    "is_subset",
    "minkowski_sum",
    "pontryagin_diff",
    "pontryagin_diff_image",
    "project",
    "remove_redundancy",
    "support",
    "support_many",
    "vertices_2d",
    "volume",
]
