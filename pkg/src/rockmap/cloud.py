"""Point cloud data model, spatial indexing and scale parameters.

Coordinates are metres throughout. ``PointCloud`` and ``SpatialIndex`` are
immutable after construction and safe to share across worker threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ArgumentError, DataError

SUPPORT_RADIUS_PS_MAX = 0.15


def default_workers() -> int:
    """Thread count for spatial queries; ROCKMAP_THREADS overrides (-1 = all)."""
    try:
        return int(os.environ.get("ROCKMAP_THREADS", "-1"))
    except ValueError:
        return -1


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points with optional per-point attribute channels."""

    points: np.ndarray
    attributes: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DataError(f"points must be (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise DataError("non-finite coordinate in point cloud")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        attrs = {}
        for name, chan in self.attributes.items():
            chan = np.asarray(chan)
            if chan.shape[0] != pts.shape[0]:
                raise DataError(
                    f"attribute '{name}' has length {chan.shape[0]}, expected {pts.shape[0]}"
                )
            chan.setflags(write=False)
            attrs[name] = chan
        object.__setattr__(self, "attributes", attrs)

    def __len__(self):
        return self.points.shape[0]

    def select(self, indices) -> "PointCloud":
        """Sub-cloud at the given indices, attribute channels included."""
        indices = np.asarray(indices)
        return PointCloud(
            self.points[indices],
            {k: v[indices] for k, v in self.attributes.items()},
        )

    def with_attributes(self, **channels) -> "PointCloud":
        return PointCloud(self.points, {**self.attributes, **channels})


class SpatialIndex:
    """kd-tree over a PointCloud for kNN and fixed-radius queries.

    Radius queries return the exact brute-force result set. kNN ties are
    broken by point index so repeated runs are deterministic.
    """

    def __init__(self, cloud: PointCloud):
        self._points = cloud.points
        self._tree = cKDTree(self._points)

    @property
    def tree(self) -> cKDTree:
        return self._tree

    def knn(self, queries, k: int, workers: int | None = None):
        """Distances and indices of the k nearest points (self included when
        a query coincides with a data point)."""
        queries = np.asarray(queries, dtype=np.float64)
        if workers is None:
            workers = default_workers()
        k = min(k, self._points.shape[0])
        d, i = self._tree.query(queries, k=k, workers=workers)
        if k == 1:
            d, i = d[..., None], i[..., None]
        return d, i

    def radius(self, query, r: float):
        """Sorted indices of all points within distance r of a single query point."""
        idx = self._tree.query_ball_point(np.asarray(query, dtype=np.float64), r)
        return np.sort(np.asarray(idx, dtype=np.intp))

    def radius_all(self, r: float, workers: int | None = None):
        """CSR neighbour lists (indptr, indices) for every data point at radius r."""
        if workers is None:
            workers = default_workers()
        lists = self._tree.query_ball_point(self._points, r, workers=workers)
        counts = np.fromiter((len(l) for l in lists), dtype=np.intp, count=len(lists))
        indptr = np.zeros(len(lists) + 1, dtype=np.intp)
        np.cumsum(counts, out=indptr[1:])
        if indptr[-1] == 0:
            return indptr, np.empty(0, dtype=np.intp)
        indices = np.concatenate([np.asarray(l, dtype=np.intp) for l in lists])
        return indptr, indices

    def pairs_within(self, r: float):
        """All unordered index pairs closer than or equal to r, as an (M, 2) array."""
        return self._tree.query_pairs(r, output_type="ndarray")


@dataclass(frozen=True)
class ScaleParams:
    """Nominal point spacing and the derived spherical support radius."""

    point_spacing: float
    support_radius: float

    @classmethod
    def from_spacing(cls, ps: float) -> "ScaleParams":
        return cls(point_spacing=ps, support_radius=support_radius(ps))


def support_radius(ps: float) -> float:
    """Spherical support radius PS * (5 - 16 * PS), valid for 0 < PS < 0.15 m."""
    if not (0.0 < ps < SUPPORT_RADIUS_PS_MAX):
        raise ArgumentError(
            f"point spacing {ps} outside (0, {SUPPORT_RADIUS_PS_MAX}) validity range"
        )
    return ps * (5.0 - 16.0 * ps)


def estimate_point_spacing(cloud: PointCloud, index: SpatialIndex | None = None) -> float:
    """Mean nearest-neighbour distance over all points.

    Used as the nominal point spacing PS; cheap stand-in for a Delaunay
    mean edge length with the same role of a scale proxy.
    """
    if len(cloud) < 2:
        raise ArgumentError("point spacing needs at least 2 points")
    if index is None:
        index = SpatialIndex(cloud)
    d, _ = index.knn(cloud.points, k=2)
    return float(d[:, 1].mean())
