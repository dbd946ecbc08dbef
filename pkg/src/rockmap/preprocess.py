"""Noise removal, density normalisation and floor removal.

Three deterministic stages: statistical outlier removal against a mean
k-NN distance statistic, voxel-grid downsampling to centroids, and a
cloth-simulation filter (CSF) that drapes a node grid over the z-inverted
cloud to classify floor points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud, SpatialIndex
from .errors import ArgumentError

log = logging.getLogger(__name__)


def remove_statistical_outliers(
    cloud: PointCloud, k: int = 6, sigma: float = 1.0, index: SpatialIndex | None = None
) -> PointCloud:
    """Drop points whose mean distance to their k nearest neighbours exceeds
    the global mean of that statistic by more than sigma standard deviations."""
    n = len(cloud)
    if n <= k:
        raise ArgumentError(f"need more than k={k} points, got {n}")
    if index is None:
        index = SpatialIndex(cloud)
    d, _ = index.knn(cloud.points, k=k + 1)  # first neighbour is the point itself
    mean_d = d[:, 1:].mean(axis=1)
    cutoff = mean_d.mean() + sigma * mean_d.std()
    return cloud.select(np.flatnonzero(mean_d <= cutoff))


def voxel_downsample(cloud: PointCloud, voxel: float = 0.02) -> PointCloud:
    """One output point per occupied voxel, at the centroid of its members.

    Output order follows lexicographic voxel index, so the result is a
    deterministic function of the input.
    """
    if voxel <= 0:
        raise ArgumentError(f"voxel size must be positive, got {voxel}")
    pts = cloud.points
    if len(cloud) == 0:
        return cloud
    ijk = np.floor((pts - pts.min(axis=0)) / voxel).astype(np.int64)
    dims = ijk.max(axis=0) + 1
    keys = (ijk[:, 0] * dims[1] + ijk[:, 1]) * dims[2] + ijk[:, 2]
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    boundaries = np.flatnonzero(np.diff(keys_sorted)) + 1
    starts = np.concatenate(([0], boundaries))
    counts = np.diff(np.concatenate((starts, [len(keys)])))
    sums = np.add.reduceat(pts[order], starts, axis=0)
    return PointCloud(sums / counts[:, None])


@dataclass(frozen=True)
class CsfParams:
    """Cloth simulation filter parameters.

    cloth_resolution defaults to 50x the nominal point spacing when built
    through :func:`default_csf_params`.
    """

    cloth_resolution: float
    iterations: int = 500
    class_threshold: float = 0.5
    rigidness: float = 0.3  # smoothing weight toward the neighbour mean

    def __post_init__(self):
        if self.cloth_resolution <= 0 or self.class_threshold <= 0:
            raise ArgumentError("CSF lengths must be positive")
        if self.iterations < 1:
            raise ArgumentError("CSF needs at least one iteration")


def default_csf_params(point_spacing: float, **overrides) -> CsfParams:
    return CsfParams(cloth_resolution=50.0 * point_spacing, **overrides)


@dataclass(frozen=True)
class FloorSplit:
    kept: PointCloud
    floor_indices: np.ndarray
    degenerate: bool = False


def remove_floor_csf(cloud: PointCloud, params: CsfParams) -> FloorSplit:
    """Classify and remove floor points with a simplified cloth simulation.

    The cloud is z-inverted, a node grid at ``cloth_resolution`` is dropped
    onto it (each node settles on the highest inverted-z point of its cell)
    and relaxed by neighbour-mean smoothing until node displacements fall
    below 1e-4 m or the iteration cap. Points whose vertical distance to
    the bilinearly interpolated cloth is within ``class_threshold`` are
    floor.
    """
    if len(cloud) == 0:
        raise ArgumentError("empty cloud")
    pts = cloud.points
    res = params.cloth_resolution
    xy_min = pts[:, :2].min(axis=0)
    xy_max = pts[:, :2].max(axis=0)
    span = xy_max - xy_min
    if span[0] < 1e-9 or span[1] < 1e-9:
        log.warning("CSF: degenerate XY extent, keeping all points")
        return FloorSplit(cloud, np.empty(0, dtype=np.intp), degenerate=True)

    zi = -pts[:, 2]  # inverted frame: floor becomes the top surface
    nx = int(np.ceil(span[0] / res)) + 1
    ny = int(np.ceil(span[1] / res)) + 1
    # Per-node ground constraint: max inverted z among points in the node's cell.
    gi = np.clip(np.rint((pts[:, 0] - xy_min[0]) / res).astype(np.intp), 0, nx - 1)
    gj = np.clip(np.rint((pts[:, 1] - xy_min[1]) / res).astype(np.intp), 0, ny - 1)
    ground = np.full((nx, ny), -np.inf)
    np.maximum.at(ground, (gi, gj), zi)
    occupied = np.isfinite(ground)

    h = np.full((nx, ny), zi.max() + res)
    w = params.rigidness
    step = 0.2 * res  # per-iteration gravity drop
    for _ in range(params.iterations):
        h_prev = h
        padded = np.pad(h, 1, mode="edge")
        nbr_mean = (padded[:-2, 1:-1] + padded[2:, 1:-1]
                    + padded[1:-1, :-2] + padded[1:-1, 2:]) / 4.0
        # Gravity only acts on nodes with a surface below them; empty nodes
        # relax toward their neighbours (Laplace interpolation).
        h = (1.0 - w) * (h - np.where(occupied, step, 0.0)) + w * nbr_mean
        h = np.where(occupied, np.maximum(ground, h), h)
        if np.abs(h - h_prev).max() < 1e-4:
            break

    cloth = _bilinear(h, (pts[:, 0] - xy_min[0]) / res, (pts[:, 1] - xy_min[1]) / res)
    is_floor = np.abs(zi - cloth) <= params.class_threshold
    floor_idx = np.flatnonzero(is_floor)
    kept = cloud.select(np.flatnonzero(~is_floor))
    return FloorSplit(kept, floor_idx)


def _bilinear(grid: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    nx, ny = grid.shape
    i0 = np.clip(np.floor(u).astype(np.intp), 0, nx - 2) if nx > 1 else np.zeros(len(u), np.intp)
    j0 = np.clip(np.floor(v).astype(np.intp), 0, ny - 2) if ny > 1 else np.zeros(len(v), np.intp)
    fu = np.clip(u - i0, 0.0, 1.0)
    fv = np.clip(v - j0, 0.0, 1.0)
    i1 = np.minimum(i0 + 1, nx - 1)
    j1 = np.minimum(j0 + 1, ny - 1)
    return ((grid[i0, j0] * (1 - fu) + grid[i1, j0] * fu) * (1 - fv)
            + (grid[i0, j1] * (1 - fu) + grid[i1, j1] * fu) * fv)
