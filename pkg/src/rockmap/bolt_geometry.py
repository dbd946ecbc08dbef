"""Per-bolt geometry: principal axis, exposed length, roof-normal deviation
and the dip pair used on the stereonet."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .clustering import euclidean_components
from .cloud import PointCloud, SpatialIndex
from .descriptors import DescriptorSet
from .errors import ArgumentError
from .structure import DiscontinuityPlane, orientation_transform

log = logging.getLogger(__name__)

WEAK_ELONGATION_RATIO = 1.5
DEFAULT_ROOF_NORMAL_RADIUS = 0.3


@dataclass(frozen=True)
class BoltVector:
    bolt_id: int
    member_indices: np.ndarray
    centroid: np.ndarray
    axis: np.ndarray                 # unit, sign-canonicalized against the roof normal
    eigenvalues: np.ndarray          # descending (eta1, eta2, eta3)
    exposed_length: float
    deviation_deg: float
    dip_angle: float
    dip_direction: float
    weak_elongation: bool = False
    warnings: tuple[str, ...] = field(default=())


def extract_bolt_clusters(
    bolt_indices, cloud: PointCloud, support_radius: float
) -> list[np.ndarray]:
    """Connected components over the bolt-labelled points; one component per bolt."""
    bolt_indices = np.asarray(bolt_indices, dtype=np.intp)
    comp = euclidean_components(cloud, bolt_indices, support_radius)
    return [bolt_indices[comp.members(c)] for c in range(comp.cluster_count)]


def refine_bolt_points(cluster_points: np.ndarray, roof_normal: np.ndarray,
                       radial_factor: float = 2.0, iterations: int = 2) -> np.ndarray:
    """Mask of points kept for geometry estimation.

    Segmentation clusters often carry a ring of rock points around the bolt
    base; those sit far from the shaft radially and bias the axis fit. Trim
    points beyond radial_factor x median radial distance and re-fit.
    """
    keep = np.ones(cluster_points.shape[0], dtype=bool)
    for _ in range(iterations):
        pts = cluster_points[keep]
        if pts.shape[0] < 4:
            break
        centroid, axis, _, _ = estimate_bolt_axis(pts, roof_normal)
        rel = cluster_points - centroid
        s = rel @ axis
        radial = np.linalg.norm(rel - s[:, None] * axis[None], axis=1)
        med = np.median(radial[keep])
        new_keep = radial <= radial_factor * max(med, 1e-9)
        # never trim away the bulk of the cluster
        if new_keep.sum() < max(4, cluster_points.shape[0] // 2):
            break
        if (new_keep == keep).all():
            break
        keep = new_keep
    return keep


def estimate_bolt_axis(cluster_points: np.ndarray, roof_normal: np.ndarray):
    """Principal axis of the cluster covariance (sample covariance, N-1),
    flipped so the axis points along the roof normal.

    Returns (centroid, axis, eigenvalues descending, weak_elongation flag).
    """
    n = cluster_points.shape[0]
    if n < 4:
        raise ArgumentError(f"need >= 4 points for a bolt axis, got {n}")
    centroid = cluster_points.mean(axis=0)
    rel = cluster_points - centroid
    cov = rel.T @ rel / (n - 1)
    w, v = np.linalg.eigh(cov)  # ascending
    eigenvalues = w[::-1].copy()
    axis = v[:, 2].copy()
    if axis @ roof_normal < 0.0:
        axis = -axis
    weak = bool(eigenvalues[0] < WEAK_ELONGATION_RATIO * max(eigenvalues[1], 1e-18))
    if weak:
        log.warning("weak elongation (eta1/eta2 < %.1f) on bolt cluster", WEAK_ELONGATION_RATIO)
    return centroid, axis, eigenvalues, weak


def bolt_quality_metrics(cluster_points: np.ndarray, centroid, axis, roof_normal):
    """(exposed length, deviation angle in degrees, dip angle, dip direction)."""
    s = (cluster_points - centroid) @ axis
    length = float(s.max() - s.min())
    cosang = np.clip(abs(float(np.dot(axis, roof_normal))), 0.0, 1.0)
    deviation = float(np.degrees(np.arccos(cosang)))
    pair = orientation_transform((axis / np.linalg.norm(axis))[None])
    return length, deviation, float(pair.dip_angle[0]), float(pair.dip_direction[0])


def local_roof_normal(
    cloud: PointCloud,
    desc: DescriptorSet,
    location,
    radius: float = DEFAULT_ROOF_NORMAL_RADIUS,
    exclude=None,
    index: SpatialIndex | None = None,
    planes: list[DiscontinuityPlane] | None = None,
):
    """Planarity-weighted mean normal of the non-bolt points around a
    location. Falls back to the containing discontinuity plane normal, then
    to global +z, when too few neighbours exist.

    Returns (unit normal, warning string or None).
    """
    if index is None:
        index = SpatialIndex(cloud)
    nbrs = index.radius(np.asarray(location, dtype=np.float64), radius)
    mask = np.ones(nbrs.shape[0], dtype=bool)
    if exclude is not None and len(nbrs):
        mask &= ~np.isin(nbrs, np.asarray(exclude, dtype=np.intp))
    nbrs = nbrs[mask]
    nbrs = nbrs[~desc.degenerate[nbrs]]
    if nbrs.shape[0] >= 10:
        normals = desc.normals[nbrs]
        weights = desc.planarity[nbrs]
        seed = normals[int(np.argmax(np.abs(normals).max(axis=1)))]
        signs = np.where(normals @ seed < 0.0, -1.0, 1.0)
        mean = (normals * (signs * weights)[:, None]).sum(axis=0)
        norm = np.linalg.norm(mean)
        if norm > 1e-9:
            return mean / norm, None
    if planes:
        loc = np.asarray(location, dtype=np.float64)
        for plane in planes:
            if abs(float(plane.normal @ (loc - plane.centroid))) < 0.3:
                rel = loc - plane.centroid
                u, v = rel @ plane.extent_axes[0], rel @ plane.extent_axes[1]
                (umin, umax), (vmin, vmax) = plane.extent_bounds
                if umin <= u <= umax and vmin <= v <= vmax:
                    return plane.normal.copy(), "roof normal from containing plane"
    log.warning("local roof normal fell back to +z at %s", location)
    return np.array([0.0, 0.0, 1.0]), "roof normal fell back to +z"


def analyze_bolts(
    bolt_indices,
    cloud: PointCloud,
    desc: DescriptorSet,
    support_radius: float,
    index: SpatialIndex | None = None,
    planes: list[DiscontinuityPlane] | None = None,
    roof_radius: float = DEFAULT_ROOF_NORMAL_RADIUS,
) -> list[BoltVector]:
    """Full per-bolt geometry pass over the bolt-labelled indices."""
    if index is None:
        index = SpatialIndex(cloud)
    bolt_indices = np.asarray(bolt_indices, dtype=np.intp)
    bolts: list[BoltVector] = []
    for cluster in extract_bolt_clusters(bolt_indices, cloud, support_radius):
        if cluster.size < 4:
            continue
        pts = cloud.points[cluster]
        seed_centroid = pts.mean(axis=0)
        roof, warning = local_roof_normal(
            cloud, desc, seed_centroid, radius=roof_radius,
            exclude=bolt_indices, index=index, planes=planes,
        )
        core = pts[refine_bolt_points(pts, roof)]
        centroid, axis, eig, weak = estimate_bolt_axis(core, roof)
        length, deviation, da, dd = bolt_quality_metrics(core, centroid, axis, roof)
        bolts.append(
            BoltVector(
                bolt_id=len(bolts),
                member_indices=cluster,
                centroid=centroid,
                axis=axis,
                eigenvalues=eig,
                exposed_length=length,
                deviation_deg=deviation,
                dip_angle=da,
                dip_direction=dd,
                weak_elongation=weak,
                warnings=(warning,) if warning else (),
            )
        )
    return bolts
