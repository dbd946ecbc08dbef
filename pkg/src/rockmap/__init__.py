"""rockmap: discontinuity mapping and rock-bolt analysis for tunnel point clouds."""

from .backend import IS_COMPILED
from .bolt_geometry import BoltVector, analyze_bolts, estimate_bolt_axis, local_roof_normal
from .bolts import (
    BaselineCylinderClassifier,
    BoltSegmentation,
    CandidateCluster,
    DetectionMetrics,
    SubprocessClassifier,
    classify_bolt_points,
    evaluate_detection,
    filter_bolt_candidates,
    get_classifier,
    metrics_from_counts,
    register_classifier,
)
from .cloud import (
    PointCloud,
    ScaleParams,
    SpatialIndex,
    estimate_point_spacing,
    support_radius,
)
from .clustering import ClusterLabels, euclidean_components, hdbscan
from .descriptors import DescriptorSet, compute_descriptors
from .errors import (
    ArgumentError,
    DataError,
    DegenerateClusterError,
    ParseError,
    RockmapError,
    StageError,
)
from .io import load_cloud, save_cloud
from .pipeline import AnalysisReport, DEFAULT_CONFIG, make_config, run_pipeline
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
    fit_discontinuity_plane,
    orientation_to_normal,
    orientation_transform,
    scaled_min_cluster_size,
)
from .synth import BoltSpec, GroundTruth, SceneSpec, SetSpec, generate_scene
from .viz import (
    CoverageReport,
    SetEnvelope,
    coverage_analysis,
    export_scene,
    render_stereonet_svg,
    stereonet_invert,
    stereonet_project,
)

__version__ = "1.0.0"

__all__ = [
    "IS_COMPILED",
    "AnalysisReport",
    "ArgumentError",
    "BaselineCylinderClassifier",
    "BoltSegmentation",
    "BoltSpec",
    "BoltVector",
    "CandidateCluster",
    "ClusterLabels",
    "CoverageReport",
    "CsfParams",
    "DEFAULT_CONFIG",
    "DataError",
    "DegenerateClusterError",
    "DescriptorSet",
    "DetectionMetrics",
    "DiscontinuityPlane",
    "DiscontinuitySet",
    "GroundTruth",
    "ParseError",
    "PointCloud",
    "RockmapError",
    "ScaleParams",
    "SceneSpec",
    "SetEnvelope",
    "SetSpec",
    "SpatialIndex",
    "StageError",
    "SubprocessClassifier",
    "analyze_bolts",
    "characterize_sets",
    "classify_bolt_points",
    "compute_descriptors",
    "coverage_analysis",
    "estimate_bolt_axis",
    "estimate_point_spacing",
    "euclidean_components",
    "evaluate_detection",
    "export_scene",
    "filter_bolt_candidates",
    "filter_planar_points",
    "fit_discontinuity_plane",
    "generate_scene",
    "get_classifier",
    "hdbscan",
    "load_cloud",
    "local_roof_normal",
    "make_config",
    "metrics_from_counts",
    "orientation_to_normal",
    "orientation_transform",
    "register_classifier",
    "remove_floor_csf",
    "remove_statistical_outliers",
    "render_stereonet_svg",
    "run_pipeline",
    "save_cloud",
    "scaled_min_cluster_size",
    "stereonet_invert",
    "stereonet_project",
    "support_radius",
    "voxel_downsample",
]
