"""Discontinuity set characterisation and per-plane fitting.

Planar points are selected on the planarity descriptor, their normals are
converted to dip angle / dip direction and polar-projected, orientation
clusters become discontinuity sets, and each set is split spatially into
individual planes which get a centroid + mean-normal fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterLabels, euclidean_components, hdbscan
from .cloud import PointCloud
from .descriptors import DescriptorSet
from .errors import ArgumentError, DegenerateClusterError

DEFAULT_PLANARITY_THRESHOLD = 0.8
DEFAULT_MIN_CLUSTER_SIZE = 10000
DEFAULT_MIN_SAMPLES = 100
DEFAULT_MIN_PLANE_POINTS = 100
# Fraction of cloud size used when scaling min_cluster_size to the scene
# (10000 of the ~700k-point reference scan).
MIN_CLUSTER_SIZE_FRACTION = 10000.0 / 700000.0


@dataclass(frozen=True)
class OrientationPairs:
    """Dip angle / dip direction (degrees) plus the polar-projected pair."""

    dip_angle: np.ndarray      # [0, 90]
    dip_direction: np.ndarray  # [0, 360)
    projected: np.ndarray      # (N, 2), inside the unit disc


@dataclass(frozen=True)
class DiscontinuityPlane:
    plane_id: int
    set_id: int
    centroid: np.ndarray
    normal: np.ndarray
    dip_angle: float
    dip_direction: float
    member_indices: np.ndarray
    # oriented in-plane rectangle: two unit axes and their (min, max) extents
    extent_axes: np.ndarray = field(repr=False, default=None)
    extent_bounds: np.ndarray = field(repr=False, default=None)

    @property
    def corners(self) -> np.ndarray:
        """Four 3D corners of the bounding rectangle in the plane."""
        (umin, umax), (vmin, vmax) = self.extent_bounds
        e1, e2 = self.extent_axes
        c = self.centroid
        return np.array([
            c + umin * e1 + vmin * e2,
            c + umax * e1 + vmin * e2,
            c + umax * e1 + vmax * e2,
            c + umin * e1 + vmax * e2,
        ])


@dataclass(frozen=True)
class DiscontinuitySet:
    set_id: int
    member_indices: np.ndarray
    dip_angle: float
    dip_direction: float
    plane_ids: list[int]


def filter_planar_points(
    desc: DescriptorSet, threshold: float = DEFAULT_PLANARITY_THRESHOLD
) -> np.ndarray:
    """Indices of non-degenerate points with planarity above the threshold."""
    if not (0.0 < threshold < 1.0):
        raise ArgumentError(f"planarity threshold must be in (0, 1), got {threshold}")
    return np.flatnonzero((desc.planarity > threshold) & ~desc.degenerate)


def orientation_transform(normals) -> OrientationPairs:
    """Normals -> (dip angle, dip direction) with hemisphere canonicalisation,
    plus the polar projection R = sin(DA)/(1 + cos(DA)) = tan(DA/2)."""
    nrm = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    lengths = np.linalg.norm(nrm, axis=1)
    if np.any(lengths < 1e-12):
        raise ArgumentError("zero-length normal")
    if np.any(np.abs(lengths - 1.0) > 1e-6):
        raise ArgumentError("normals must be unit length within 1e-6")
    da = np.degrees(np.arccos(np.clip(nrm[:, 2], -1.0, 1.0)))
    dd = np.degrees(np.arctan2(nrm[:, 0], nrm[:, 1])) % 360.0
    flip = da > 90.0
    da = np.where(flip, 180.0 - da, da)
    dd = np.where(flip, (dd + 180.0) % 360.0, dd)
    da_r = np.radians(da)
    r = np.sin(da_r) / (1.0 + np.cos(da_r))
    proj = np.column_stack((r * np.sin(np.radians(dd)), r * np.cos(np.radians(dd))))
    return OrientationPairs(da, dd, proj)


def orientation_to_normal(da, dd) -> np.ndarray:
    """Inverse of orientation_transform onto the canonical hemisphere."""
    da_r, dd_r = np.radians(da), np.radians(dd)
    return np.stack(
        (np.sin(da_r) * np.sin(dd_r), np.sin(da_r) * np.cos(dd_r), np.cos(da_r)),
        axis=-1,
    )


def scaled_min_cluster_size(n_points: int, floor: int = 50) -> int:
    """min_cluster_size proportional to cloud size (the reference default of
    10000 corresponds to a ~700k-point scan)."""
    return max(floor, int(round(MIN_CLUSTER_SIZE_FRACTION * n_points)))


def characterize_sets(
    cloud: PointCloud,
    desc: DescriptorSet,
    planar_idx: np.ndarray,
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    component_cell: float = 0.058,
    min_plane_points: int = DEFAULT_MIN_PLANE_POINTS,
) -> tuple[list[DiscontinuitySet], list[DiscontinuityPlane]]:
    """Cluster planar-point orientations into sets, then split each set into
    individual planes by Euclidean connectivity and fit them."""
    planar_idx = np.asarray(planar_idx, dtype=np.intp)
    if planar_idx.size == 0:
        return [], []
    pairs = orientation_transform(desc.normals[planar_idx])
    labels = hdbscan(pairs.projected, min_cluster_size, min_samples)

    sets: list[DiscontinuitySet] = []
    planes: list[DiscontinuityPlane] = []
    for set_id in range(labels.cluster_count):
        members = planar_idx[labels.members(set_id)]
        comp = euclidean_components(cloud, members, component_cell)
        plane_ids = []
        for cid in range(comp.cluster_count):
            cluster = members[comp.members(cid)]
            if cluster.size <= min_plane_points:
                continue  # residual noise
            plane = fit_discontinuity_plane(
                cluster, cloud, desc, plane_id=len(planes), set_id=set_id
            )
            plane_ids.append(plane.plane_id)
            planes.append(plane)
        mean_n = _aligned_mean_normal(desc.normals[members])
        pair = orientation_transform(mean_n[None])
        sets.append(
            DiscontinuitySet(
                set_id=set_id,
                member_indices=members,
                dip_angle=float(pair.dip_angle[0]),
                dip_direction=float(pair.dip_direction[0]),
                plane_ids=plane_ids,
            )
        )
    return sets, planes


def _aligned_mean_normal(normals: np.ndarray) -> np.ndarray:
    """Mean normal after flipping members into the hemisphere of the
    dominant seed normal (largest absolute component, lowest index on ties)."""
    comp_max = np.abs(normals).max(axis=1)
    seed = normals[int(np.argmax(comp_max))]
    signs = np.where(normals @ seed < 0.0, -1.0, 1.0)
    mean = (normals * signs[:, None]).mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 0.5:
        raise DegenerateClusterError(
            f"mean normal norm {norm:.3f} < 0.5: incoherent cluster normals"
        )
    return mean / norm


def fit_discontinuity_plane(
    cluster_indices,
    cloud: PointCloud,
    desc: DescriptorSet,
    plane_id: int = 0,
    set_id: int = 0,
) -> DiscontinuityPlane:
    """Centroid + hemisphere-aligned mean-normal plane fit with an oriented
    bounding rectangle of the member projections."""
    idx = np.asarray(cluster_indices, dtype=np.intp)
    pts = cloud.points[idx]
    centroid = pts.mean(axis=0)
    v_hat = _aligned_mean_normal(desc.normals[idx])
    pair = orientation_transform(v_hat[None])

    e1 = np.cross(v_hat, np.array([0.0, 0.0, 1.0]))
    if np.linalg.norm(e1) < 1e-6:
        e1 = np.cross(v_hat, np.array([1.0, 0.0, 0.0]))
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(v_hat, e1)
    e2 /= np.linalg.norm(e2)
    rel = pts - centroid
    u, v = rel @ e1, rel @ e2
    bounds = np.array([[u.min(), u.max()], [v.min(), v.max()]])

    return DiscontinuityPlane(
        plane_id=plane_id,
        set_id=set_id,
        centroid=centroid,
        normal=v_hat,
        dip_angle=float(pair.dip_angle[0]),
        dip_direction=float(pair.dip_direction[0]),
        member_indices=idx,
        extent_axes=np.stack((e1, e2)),
        extent_bounds=bounds,
    )
