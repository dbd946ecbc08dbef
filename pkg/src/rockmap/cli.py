"""Command-line entry point.

Every stage is a subcommand runnable on saved intermediates; ``pipeline``
runs the whole flow. A JSON config file can preload any option; explicit
flags win over the file.

Exit codes: 0 success, 2 config/argument error, 3 data error, 4 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bolts as bolts_mod
from . import synth as synth_mod
from .bolt_geometry import BoltVector, analyze_bolts
from .cloud import ScaleParams, SpatialIndex, estimate_point_spacing
from .descriptors import compute_descriptors
from .errors import ArgumentError, DataError, ParseError, RockmapError, StageError
from .io import load_cloud, save_cloud
from .pipeline import (
    DEFAULT_CONFIG,
    load_descriptors,
    make_config,
    run_pipeline,
    save_descriptors,
)
from .preprocess import (
    CsfParams,
    remove_floor_csf,
    remove_statistical_outliers,
    voxel_downsample,
)
from .structure import (
    DiscontinuityPlane,
    characterize_sets,
    filter_planar_points,
    scaled_min_cluster_size,
)
from .viz import SetEnvelope, coverage_analysis, export_scene, render_stereonet_svg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STAGE = 4

log = logging.getLogger(__name__)


# flag value parser per config key (bools get paired --x / --no-x flags)
_CONFIG_TYPES = {
    "outlier_enabled": bool, "voxel_enabled": bool, "csf_enabled": bool,
    "outlier_k": int, "outlier_sigma": float, "voxel_size": float,
    "csf_resolution": float, "csf_iterations": int, "csf_class_threshold": float,
    "planarity_threshold": float, "min_cluster_size": int, "min_samples": int,
    "min_plane_points": int, "curvature_percentile": float,
    "bolt_min_size": int, "bolt_passthrough": int, "roi_radius": float,
    "classifier": str, "classifier_command": str,
    "roof_normal_radius": float, "cone_radius_deg": float,
    "flip_pole_azimuth": bool, "export_metric": str, "export_format": str,
}


def _add_config_flags(p: argparse.ArgumentParser, keys) -> None:
    """One optional flag per config key; unset flags fall back to file/defaults."""
    for key in keys:
        kind = _CONFIG_TYPES[key]
        flag = "--" + key.replace("_", "-")
        if kind is bool:
            group = p.add_mutually_exclusive_group()
            group.add_argument(flag, dest=key, action="store_true", default=None)
            group.add_argument(
                "--no-" + key.replace("_", "-"), dest=key, action="store_false",
                default=None,
            )
        else:
            p.add_argument(flag, dest=key, type=kind, default=None)


def _resolve_config(args, keys) -> dict:
    """File config first, then explicit flags on top."""
    overrides: dict = {}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ArgumentError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ArgumentError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ArgumentError("config file must hold a JSON object")
        overrides.update(loaded)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if "classifier_command" in overrides and isinstance(
        overrides["classifier_command"], str
    ):
        overrides["classifier_command"] = overrides["classifier_command"].split()
    return make_config(overrides)


def _prepare(cloud):
    """Shared standalone-stage setup: index, scale and descriptors (reused
    from attribute channels when the input was saved by ``descriptors``)."""
    index = SpatialIndex(cloud)
    scale = ScaleParams.from_spacing(estimate_point_spacing(cloud, index))
    try:
        desc = load_descriptors(cloud)
    except ArgumentError:
        desc = compute_descriptors(cloud, index, scale.support_radius)
    return index, scale, desc


def _emit(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ------------------------------------------------------------- subcommands

def cmd_preprocess(args) -> int:
    cfg = _resolve_config(args, _PREPROCESS_KEYS)
    cloud = load_cloud(args.input)
    n0 = len(cloud)
    if cfg["outlier_enabled"]:
        cloud = remove_statistical_outliers(cloud, cfg["outlier_k"], cfg["outlier_sigma"])
    if cfg["voxel_enabled"]:
        cloud = voxel_downsample(cloud, cfg["voxel_size"])
    if cfg["csf_enabled"]:
        ps = estimate_point_spacing(cloud)
        split = remove_floor_csf(cloud, CsfParams(
            cloth_resolution=cfg["csf_resolution"] or 50.0 * ps,
            iterations=cfg["csf_iterations"],
            class_threshold=cfg["csf_class_threshold"],
        ))
        cloud = split.kept
    save_cloud(cloud, args.output)
    print(f"preprocess: {n0} -> {len(cloud)} points -> {args.output}")
    return EXIT_OK


def cmd_descriptors(args) -> int:
    cloud = load_cloud(args.input)
    index = SpatialIndex(cloud)
    scale = ScaleParams.from_spacing(estimate_point_spacing(cloud, index))
    desc = compute_descriptors(cloud, index, scale.support_radius)
    save_descriptors(cloud, desc, args.output)
    print(
        f"descriptors: {len(cloud)} points, support radius "
        f"{scale.support_radius:.4f} m -> {args.output}"
    )
    return EXIT_OK


def cmd_map_structures(args) -> int:
    cfg = _resolve_config(args, _STRUCTURE_KEYS)
    cloud = load_cloud(args.input)
    _, scale, desc = _prepare(cloud)
    planar = filter_planar_points(desc, cfg["planarity_threshold"])
    mcs = cfg["min_cluster_size"] or scaled_min_cluster_size(len(cloud))
    sets, planes = characterize_sets(
        cloud, desc, planar,
        min_cluster_size=mcs,
        min_samples=cfg["min_samples"],
        component_cell=scale.support_radius,
        min_plane_points=cfg["min_plane_points"],
    )
    payload = {
        "sets": [
            {
                "set_id": s.set_id,
                "point_count": int(s.member_indices.size),
                "plane_count": len(s.plane_ids),
                "dip_angle": s.dip_angle,
                "dip_direction": s.dip_direction,
            }
            for s in sets
        ],
        "planes": [_plane_dict(p) for p in planes],
    }
    _emit(payload, args.report)
    print(f"map-structures: {len(sets)} sets, {len(planes)} planes")
    return EXIT_OK


def cmd_detect_bolts(args) -> int:
    cfg = _resolve_config(args, _BOLT_KEYS)
    cloud = load_cloud(args.input)
    index, scale, desc = _prepare(cloud)
    candidates = bolts_mod.filter_bolt_candidates(
        cloud, desc, scale.support_radius,
        percentile=cfg["curvature_percentile"],
        min_size=cfg["bolt_min_size"],
        passthrough_size=cfg["bolt_passthrough"],
        roi_radius=cfg["roi_radius"],
        index=index,
    )
    backend = (
        bolts_mod.get_classifier("subprocess", command=cfg["classifier_command"])
        if cfg["classifier"] == "subprocess"
        else bolts_mod.get_classifier(cfg["classifier"])
    )
    seg = bolts_mod.classify_bolt_points(candidates, cloud, desc, backend)
    payload = {
        "candidate_clusters": len(candidates),
        "candidate_points": int(seg.point_indices.size),
        "bolt_indices": seg.bolt_indices.tolist(),
    }
    _emit(payload, args.report)
    print(
        f"detect-bolts: {len(candidates)} candidate clusters, "
        f"{seg.bolt_indices.size} bolt points"
    )
    return EXIT_OK


def cmd_analyze_bolts(args) -> int:
    cfg = _resolve_config(args, ("roof_normal_radius",))
    cloud = load_cloud(args.input)
    index, scale, desc = _prepare(cloud)
    detection = json.loads(Path(args.bolt_report).read_text())
    bolt_idx = np.asarray(detection["bolt_indices"], dtype=np.intp)
    bolts = analyze_bolts(
        bolt_idx, cloud, desc, scale.support_radius,
        index=index, roof_radius=cfg["roof_normal_radius"],
    )
    _emit({"bolts": [_bolt_dict(b) for b in bolts]}, args.report)
    print(f"analyze-bolts: {len(bolts)} bolts")
    return EXIT_OK


def cmd_visualize(args) -> int:
    cfg = _resolve_config(args, _VIZ_KEYS)
    report = json.loads(Path(args.report).read_text())
    planes = [_plane_from_dict(d) for d in report.get("planes", [])]
    bolts = [_bolt_from_dict(d) for d in report.get("bolts", [])]
    envelopes = [
        SetEnvelope(s["set_id"], s["dip_angle"], s["dip_direction"],
                    cfg["cone_radius_deg"])
        for s in report.get("sets", [])
    ]
    plane_counts = {s["set_id"]: s["plane_count"] for s in report.get("sets", [])}
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    render_stereonet_svg(
        [(p.set_id, p.dip_angle, p.dip_direction) for p in planes],
        [(b.bolt_id, b.dip_angle, b.dip_direction) for b in bolts],
        envelopes,
        outdir / "stereonet.svg",
        plane_counts=plane_counts,
        flip_pole_azimuth=cfg["flip_pole_azimuth"],
    )
    export_scene(planes, bolts, outdir / ("scene." + cfg["export_format"]),
                 metric=cfg["export_metric"], format=cfg["export_format"])
    coverage = coverage_analysis(bolts, envelopes)
    print(
        f"visualize: {len(planes)} planes, {len(bolts)} bolts, "
        f"{len(coverage.bolts_outside_all_sets)} bolts outside all set cones "
        f"-> {outdir}"
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        raw = json.loads(Path(args.scene).read_text())
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"scene file is not valid JSON: {exc}") from exc
    spec = _scene_from_dict(raw)
    cloud, truth = synth_mod.generate_scene(spec)
    save_cloud(cloud, args.output, format=args.format)
    if args.labels:
        synth_mod.save_labels(truth, args.labels)
    print(f"synth: {len(cloud)} points -> {args.output}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _resolve_config(args, _PIPELINE_KEYS)
    cloud = load_cloud(args.input)
    truth = synth_mod.load_labels(args.labels) if args.labels else None
    report = run_pipeline(
        cloud, cfg, truth=truth, outdir=args.outdir,
        keep_intermediate=args.keep_intermediate,
    )
    _print_summary(report)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = json.loads(Path(args.report).read_text())
    truth = synth_mod.load_labels(args.labels)
    predicted = [
        np.asarray(b["member_indices"], dtype=np.intp)
        for b in report.get("bolts", [])
    ]
    n_truth = int(truth.bolt_id.max()) + 1 if truth.bolt_id.size else 0
    truth_clusters = [truth.bolt_members(i) for i in range(n_truth)]
    m = bolts_mod.evaluate_detection(predicted, truth_clusters)
    _emit(
        {
            "tp": m.tp, "fp": m.fp, "fn": m.fn,
            "precision": m.precision, "recall": m.recall,
            "point_iou": m.point_iou, "point_precision": m.point_precision,
        },
        args.out,
    )
    print(
        f"evaluate: tp={m.tp} fp={m.fp} fn={m.fn} "
        f"precision={m.precision:.4f} recall={m.recall:.4f}"
    )
    return EXIT_OK


# --------------------------------------------------------- (de)serialisers

def _plane_dict(p: DiscontinuityPlane) -> dict:
    return {
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


def _plane_from_dict(d: dict) -> DiscontinuityPlane:
    return DiscontinuityPlane(
        plane_id=d["plane_id"],
        set_id=d["set_id"],
        centroid=np.asarray(d["centroid"]),
        normal=np.asarray(d["normal"]),
        dip_angle=d["dip_angle"],
        dip_direction=d["dip_direction"],
        member_indices=np.empty(d.get("size", 0), dtype=np.intp),
        extent_axes=np.asarray(d["extent_axes"]),
        extent_bounds=np.asarray(d["extent_bounds"]),
    )


def _bolt_dict(b: BoltVector) -> dict:
    return {
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


def _bolt_from_dict(d: dict) -> BoltVector:
    return BoltVector(
        bolt_id=d["bolt_id"],
        member_indices=np.asarray(d.get("member_indices", []), dtype=np.intp),
        centroid=np.asarray(d["centroid"]),
        axis=np.asarray(d["axis"]),
        eigenvalues=np.asarray(d["eigenvalues"]),
        exposed_length=d["exposed_length"],
        deviation_deg=d["deviation_deg"],
        dip_angle=d["dip_angle"],
        dip_direction=d["dip_direction"],
        weak_elongation=d.get("weak_elongation", False),
        warnings=tuple(d.get("warnings", ())),
    )


def _scene_from_dict(raw: dict) -> synth_mod.SceneSpec:
    try:
        sets = [synth_mod.SetSpec(**s) for s in raw.get("sets", [])]
        bolts = [synth_mod.BoltSpec(
            base=tuple(b["base"]), axis=tuple(b["axis"]),
            length=b["length"], radius=b.get("radius", 0.01),
        ) for b in raw.get("bolts", [])]
        scalar = {k: v for k, v in raw.items() if k not in ("sets", "bolts")}
        return synth_mod.SceneSpec(sets=sets, bolts=bolts, **scalar)
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"bad scene spec: {exc}") from exc


def _print_summary(report) -> None:
    d = report.to_dict()
    print(json.dumps(d, indent=2, sort_keys=True))
    total = sum(report.timings.values())
    print(
        f"pipeline: {d['input']['initial']} -> "
        f"{d['input']['after_floor_removal']} points, "
        f"{len(report.sets)} sets / {len(report.planes)} planes, "
        f"{len(report.bolts)} bolts, {total:.1f} s total",
        file=sys.stderr,
    )


# ------------------------------------------------------------------ parser

_PREPROCESS_KEYS = (
    "outlier_enabled", "voxel_enabled", "csf_enabled",
    "outlier_k", "outlier_sigma", "voxel_size",
    "csf_resolution", "csf_iterations", "csf_class_threshold",
)
_STRUCTURE_KEYS = (
    "planarity_threshold", "min_cluster_size", "min_samples", "min_plane_points",
)
_BOLT_KEYS = (
    "curvature_percentile", "bolt_min_size", "bolt_passthrough",
    "roi_radius", "classifier", "classifier_command",
)
_VIZ_KEYS = (
    "cone_radius_deg", "flip_pole_azimuth", "export_metric", "export_format",
)
_PIPELINE_KEYS = tuple(DEFAULT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rockmap",
        description="Discontinuity mapping and rock-bolt analysis for tunnel point clouds.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage(name, fn, help_, keys=(), config=True):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(fn=fn)
        if config:
            p.add_argument("--config", help="JSON config file; flags win")
            _add_config_flags(p, keys)
        return p

    p = stage("preprocess", cmd_preprocess,
              "outlier removal, voxel downsampling and floor removal",
              _PREPROCESS_KEYS)
    p.add_argument("input")
    p.add_argument("output")

    p = stage("descriptors", cmd_descriptors,
              "per-point eigen descriptors saved as PLY channels", config=False)
    p.add_argument("input")
    p.add_argument("output")

    p = stage("map-structures", cmd_map_structures,
              "discontinuity set and plane extraction", _STRUCTURE_KEYS)
    p.add_argument("input")
    p.add_argument("--report", help="JSON output path (default: stdout)")

    p = stage("detect-bolts", cmd_detect_bolts,
              "curvature filter plus bolt/non-bolt classification", _BOLT_KEYS)
    p.add_argument("input")
    p.add_argument("--report", help="JSON output path (default: stdout)")

    p = stage("analyze-bolts", cmd_analyze_bolts,
              "bolt axis, exposed length and roof-normal deviation",
              ("roof_normal_radius",))
    p.add_argument("input")
    p.add_argument("bolt_report", help="JSON from detect-bolts")
    p.add_argument("--report", help="JSON output path (default: stdout)")

    p = stage("visualize", cmd_visualize,
              "stereonet SVG and 3D scene export from a report", _VIZ_KEYS)
    p.add_argument("report", help="pipeline or stage report JSON")
    p.add_argument("outdir")

    p = stage("synth", cmd_synth,
              "generate a synthetic labelled tunnel scene", config=False)
    p.add_argument("scene", help="JSON scene spec")
    p.add_argument("output")
    p.add_argument("--labels", help="write the truth label sidecar here")
    p.add_argument("--format", default="ply-binary-le",
                   choices=["ply-ascii", "ply-binary-le", "xyz-text"])

    p = stage("pipeline", cmd_pipeline, "run the full workflow",
              _PIPELINE_KEYS)
    p.add_argument("input")
    p.add_argument("outdir")
    p.add_argument("--labels", help="truth sidecar for detection metrics")
    p.add_argument("--keep-intermediate", action="store_true")

    p = stage("evaluate", cmd_evaluate,
              "object detection metrics against a truth sidecar", config=False)
    p.add_argument("report", help="report JSON containing bolts")
    p.add_argument("labels", help="truth label sidecar")
    p.add_argument("--out", help="JSON output path (default: stdout)")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except ArgumentError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ParseError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except RockmapError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
