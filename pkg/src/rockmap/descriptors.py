"""Per-point PCA eigen-features: eigenvalues, normals, planarity, curvature.

Computed once over the support-radius neighbourhood and reused by both the
structure-mapping and bolt pipelines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import neighborhood_eigen
from .cloud import PointCloud, SpatialIndex
from .errors import ArgumentError


@dataclass(frozen=True)
class DescriptorSet:
    """Per-point neighbourhood descriptors.

    eigenvalues are descending (l1 >= l2 >= l3 >= 0) in m^2; ``normal`` is
    the unit eigenvector of the smallest eigenvalue. Points with fewer than
    3 neighbours are degenerate: planarity = curvature = 0, normal = +z.
    """

    eigenvalues: np.ndarray   # (N, 3)
    normals: np.ndarray       # (N, 3)
    planarity: np.ndarray     # (N,)
    curvature: np.ndarray     # (N,)
    neighbour_count: np.ndarray  # (N,)

    @property
    def degenerate(self) -> np.ndarray:
        return self.neighbour_count < 3

    def __len__(self):
        return self.planarity.shape[0]


def compute_descriptors(
    cloud: PointCloud, index: SpatialIndex, radius: float
) -> DescriptorSet:
    """Eigen-decompose the covariance of each point's radius neighbourhood
    (the point itself included)."""
    if radius <= 0:
        raise ArgumentError(f"radius must be positive, got {radius}")
    indptr, indices = index.radius_all(radius)
    eigvals, normals, counts = neighborhood_eigen(
        np.ascontiguousarray(cloud.points), indptr, indices
    )
    l1, l2, l3 = eigvals[:, 0], eigvals[:, 1], eigvals[:, 2]
    total = l1 + l2 + l3
    with np.errstate(divide="ignore", invalid="ignore"):
        planarity = np.where(l1 > 0, (l2 - l3) / l1, 0.0)
        curvature = np.where(total > 0, l3 / total, 0.0)
    degen = counts < 3
    planarity[degen] = 0.0
    curvature[degen] = 0.0
    for arr in (eigvals, normals, planarity, curvature, counts):
        arr.setflags(write=False)
    return DescriptorSet(eigvals, normals, planarity, curvature, counts)
