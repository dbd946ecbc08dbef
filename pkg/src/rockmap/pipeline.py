"""End-to-end orchestration: preprocess -> descriptors -> (structure mapping
in parallel with bolt detection) -> bolt geometry -> integration outputs.

Eigen descriptors are computed exactly once and shared by both branches.
Every stage is also callable standalone on saved intermediates (see cli).
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bolts as bolts_mod
from .bolt_geometry import BoltVector, analyze_bolts
from .cloud import (
    PointCloud,
    ScaleParams,
    SpatialIndex,
    estimate_point_spacing,
)
from .descriptors import DescriptorSet, compute_descriptors
from .errors import ArgumentError, StageError
from .io import save_cloud
from .preprocess import (
    CsfParams,
    remove_floor_csf,
    remove_statistical_outliers,
    voxel_downsample,
)
from .structure import (
    DiscontinuityPlane,
    DiscontinuitySet,
    characterize_sets,
    filter_planar_points,
    scaled_min_cluster_size,
)
from .viz import (
    CoverageReport,
    SetEnvelope,
    coverage_analysis,
    export_scene,
    render_stereonet_svg,
)

log = logging.getLogger(__name__)

DEFAULT_CONFIG: dict = {
    "outlier_enabled": True,
    "voxel_enabled": True,
    "outlier_k": 6,
    "outlier_sigma": 1.0,
    "voxel_size": 0.02,
    "csf_enabled": True,
    "csf_resolution": None,       # None -> 50 * point spacing
    "csf_iterations": 500,
    "csf_class_threshold": 0.5,
    "planarity_threshold": 0.8,
    "min_cluster_size": None,     # None -> scaled to cloud size
    "min_samples": 100,
    "min_plane_points": 100,
    "curvature_percentile": 0.90,
    "bolt_min_size": 100,
    "bolt_passthrough": 400,
    "roi_radius": 0.15,
    "classifier": "baseline",
    "classifier_command": None,   # for the subprocess backend
    "roof_normal_radius": 0.3,
    "cone_radius_deg": 15.0,
    "flip_pole_azimuth": False,
    "export_metric": "none",
    "export_format": "ply",
}


def make_config(overrides: dict | None = None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if overrides:
        unknown = set(overrides) - set(cfg)
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


@dataclass
class AnalysisReport:
    input_counts: dict
    scale: ScaleParams
    sets: list[DiscontinuitySet]
    planes: list[DiscontinuityPlane]
    bolts: list[BoltVector]
    coverage: CoverageReport
    timings: dict = field(default_factory=dict)
    detection: bolts_mod.DetectionMetrics | None = None

    def to_dict(self) -> dict:
        return {
            "input": self.input_counts,
            "scale": {
                "point_spacing": self.scale.point_spacing,
                "support_radius": self.scale.support_radius,
            },
            "sets": [
                {
                    "set_id": s.set_id,
                    "point_count": int(s.member_indices.size),
                    "plane_count": len(s.plane_ids),
                    "dip_angle": s.dip_angle,
                    "dip_direction": s.dip_direction,
                }
                for s in self.sets
            ],
            "planes": [
                {
                    "plane_id": p.plane_id,
                    "set_id": p.set_id,
                    "dip_angle": p.dip_angle,
                    "dip_direction": p.dip_direction,
                    "centroid": p.centroid.tolist(),
                    "normal": p.normal.tolist(),
                    "extent_axes": p.extent_axes.tolist(),
                    "extent_bounds": np.asarray(p.extent_bounds).tolist(),
                    "size": int(p.member_indices.size),
                }
                for p in self.planes
            ],
            "bolts": [
                {
                    "bolt_id": b.bolt_id,
                    "size": int(b.member_indices.size),
                    "member_indices": b.member_indices.tolist(),
                    "centroid": b.centroid.tolist(),
                    "axis": b.axis.tolist(),
                    "eigenvalues": b.eigenvalues.tolist(),
                    "exposed_length": b.exposed_length,
                    "deviation_deg": b.deviation_deg,
                    "dip_angle": b.dip_angle,
                    "dip_direction": b.dip_direction,
                    "weak_elongation": b.weak_elongation,
                    "warnings": list(b.warnings),
                }
                for b in self.bolts
            ],
            "coverage": {
                "bolts_outside_all_sets": self.coverage.bolts_outside_all_sets,
                "unsupported_sets": self.coverage.unsupported_sets,
                "per_set_counts": {str(k): v for k, v in self.coverage.per_set_counts.items()},
            },
            "detection": None
            if self.detection is None
            else {
                "tp": self.detection.tp,
                "fp": self.detection.fp,
                "fn": self.detection.fn,
                "precision": self.detection.precision,
                "recall": self.detection.recall,
                "point_iou": self.detection.point_iou,
                "point_precision": self.detection.point_precision,
            },
            "timings": self.timings,
        }


class _StageTimer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, stage: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except Exception as exc:
            raise StageError(stage, exc) from exc
        self.timings[stage] = time.perf_counter() - t0
        return result


def preprocess_stage(cloud: PointCloud, cfg: dict, timer: _StageTimer):
    counts = {"initial": len(cloud)}
    if cfg["outlier_enabled"]:
        cloud = timer.run(
            "statistical_outlier_removal",
            remove_statistical_outliers, cloud, cfg["outlier_k"], cfg["outlier_sigma"],
        )
    counts["after_outlier_removal"] = len(cloud)
    if cfg["voxel_enabled"]:
        cloud = timer.run("voxel_downsample", voxel_downsample, cloud, cfg["voxel_size"])
    counts["after_downsample"] = len(cloud)
    ps = estimate_point_spacing(cloud)
    if cfg["csf_enabled"]:
        params = CsfParams(
            cloth_resolution=cfg["csf_resolution"] or 50.0 * ps,
            iterations=cfg["csf_iterations"],
            class_threshold=cfg["csf_class_threshold"],
        )
        split = timer.run("cloth_simulation_filter", remove_floor_csf, cloud, params)
        cloud = split.kept
    counts["after_floor_removal"] = len(cloud)
    if len(cloud) == 0:
        raise StageError("cloth_simulation_filter", ValueError("no points left after floor removal"))
    return cloud, counts


def descriptor_stage(cloud: PointCloud, timer: _StageTimer):
    index = SpatialIndex(cloud)
    scale = ScaleParams.from_spacing(estimate_point_spacing(cloud, index))
    desc = timer.run(
        "eigen_descriptors", compute_descriptors, cloud, index, scale.support_radius
    )
    return index, scale, desc


def structure_stage(cloud, desc, scale, cfg, timer: _StageTimer):
    planar = timer.run(
        "planarity_filter", filter_planar_points, desc, cfg["planarity_threshold"]
    )
    mcs = cfg["min_cluster_size"] or scaled_min_cluster_size(len(cloud))
    sets, planes = timer.run(
        "set_characterisation",
        characterize_sets,
        cloud, desc, planar,
        min_cluster_size=mcs,
        min_samples=cfg["min_samples"],
        component_cell=scale.support_radius,
        min_plane_points=cfg["min_plane_points"],
    )
    return sets, planes


def bolt_stage(cloud, desc, scale, index, cfg, timer: _StageTimer):
    candidates = timer.run(
        "bolt_geometric_filter",
        bolts_mod.filter_bolt_candidates,
        cloud, desc, scale.support_radius,
        percentile=cfg["curvature_percentile"],
        min_size=cfg["bolt_min_size"],
        passthrough_size=cfg["bolt_passthrough"],
        roi_radius=cfg["roi_radius"],
        index=index,
    )
    if cfg["classifier"] == "subprocess":
        backend = bolts_mod.get_classifier("subprocess", command=cfg["classifier_command"])
    else:
        backend = bolts_mod.get_classifier(cfg["classifier"])
    segmentation = timer.run(
        "bolt_classification",
        bolts_mod.classify_bolt_points, candidates, cloud, desc, backend,
    )
    return candidates, segmentation


def run_pipeline(
    cloud: PointCloud,
    cfg: dict | None = None,
    truth=None,
    outdir: Path | None = None,
    keep_intermediate: bool = False,
) -> AnalysisReport:
    """Execute the full workflow on an input cloud.

    When ``truth`` (a synth GroundTruth) is given, detection metrics against
    the planted bolts are included. When ``outdir`` is given the stereonet
    SVG, scene export and JSON report are written there.
    """
    cfg = make_config(cfg)
    timer = _StageTimer()
    written: list[Path] = []
    if outdir:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
    try:
        pre, counts = preprocess_stage(cloud, cfg, timer)
        if outdir and keep_intermediate:
            p = Path(outdir) / "preprocessed.ply"
            save_cloud(pre, p)
            written.append(p)
        index, scale, desc = descriptor_stage(pre, timer)
        if outdir and keep_intermediate:
            p = Path(outdir) / "descriptors.ply"
            save_descriptors(pre, desc, p)
            written.append(p)

        with ThreadPoolExecutor(max_workers=2) as pool:
            f_struct = pool.submit(structure_stage, pre, desc, scale, cfg, timer)
            f_bolt = pool.submit(bolt_stage, pre, desc, scale, index, cfg, timer)
            sets, planes = f_struct.result()
            candidates, segmentation = f_bolt.result()

        bolt_vecs = timer.run(
            "bolt_orientation_estimation",
            analyze_bolts,
            segmentation.bolt_indices, pre, desc, scale.support_radius,
            index=index, planes=planes, roof_radius=cfg["roof_normal_radius"],
        )
        envelopes = [
            SetEnvelope(s.set_id, s.dip_angle, s.dip_direction, cfg["cone_radius_deg"])
            for s in sets
        ]
        coverage = timer.run("coverage_analysis", coverage_analysis, bolt_vecs, envelopes)

        detection = None
        if truth is not None and truth.bolt_id.size and truth.bolt_id.max() >= 0:
            # truth indices refer to the original cloud; only comparable when
            # preprocessing dropped nothing (e.g. a synth cloud run raw)
            if len(cloud) == truth.kind.shape[0] and len(pre) == len(cloud):
                pred = [b.member_indices for b in bolt_vecs]
                n_truth = int(truth.bolt_id.max()) + 1
                truth_clusters = [truth.bolt_members(i) for i in range(n_truth)]
                detection = bolts_mod.evaluate_detection(pred, truth_clusters)

        report = AnalysisReport(
            input_counts=counts,
            scale=scale,
            sets=sets,
            planes=planes,
            bolts=bolt_vecs,
            coverage=coverage,
            timings=timer.timings,
            detection=detection,
        )
        if outdir:
            poles = [(p.set_id, p.dip_angle, p.dip_direction) for p in planes]
            bolt_marks = [(b.bolt_id, b.dip_angle, b.dip_direction) for b in bolt_vecs]
            plane_counts = {s.set_id: len(s.plane_ids) for s in sets}
            svg = outdir / "stereonet.svg"
            render_stereonet_svg(
                poles, bolt_marks, envelopes, svg,
                plane_counts=plane_counts,
                flip_pole_azimuth=cfg["flip_pole_azimuth"],
            )
            written.append(svg)
            scene = outdir / ("scene." + cfg["export_format"])
            export_scene(planes, bolt_vecs, scene,
                         metric=cfg["export_metric"], format=cfg["export_format"])
            written.append(scene)
            rpt = outdir / "report.json"
            rpt.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
            written.append(rpt)
        return report
    except StageError:
        for p in written:
            try:
                p.unlink()
            except OSError:
                pass
        raise


# ------------------------------------------------- descriptor intermediates

_DESC_CHANNELS = ("l1", "l2", "l3", "nx", "ny", "nz", "planarity", "curvature", "nbrs")


def save_descriptors(cloud: PointCloud, desc: DescriptorSet, path) -> None:
    """Dump descriptors as PLY attribute channels next to the coordinates."""
    save_cloud(
        cloud.with_attributes(
            l1=desc.eigenvalues[:, 0], l2=desc.eigenvalues[:, 1], l3=desc.eigenvalues[:, 2],
            nx=desc.normals[:, 0], ny=desc.normals[:, 1], nz=desc.normals[:, 2],
            planarity=desc.planarity, curvature=desc.curvature,
            nbrs=desc.neighbour_count.astype(np.float64),
        ),
        path,
    )


def load_descriptors(cloud: PointCloud) -> DescriptorSet:
    """Rebuild a DescriptorSet from the attribute channels of a saved cloud."""
    missing = [c for c in _DESC_CHANNELS if c not in cloud.attributes]
    if missing:
        raise ArgumentError(f"cloud lacks descriptor channels: {missing}")
    a = cloud.attributes
    return DescriptorSet(
        eigenvalues=np.column_stack([a["l1"], a["l2"], a["l3"]]),
        normals=np.column_stack([a["nx"], a["ny"], a["nz"]]),
        planarity=np.asarray(a["planarity"]),
        curvature=np.asarray(a["curvature"]),
        neighbour_count=np.asarray(a["nbrs"]).astype(np.int64),
    )
