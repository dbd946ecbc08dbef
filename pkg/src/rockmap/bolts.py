"""Two-stage rock bolt identification.

Stage 1 is a curvature-percentile geometric filter with cluster size rules
and region-of-interest recovery. Stage 2 is a pluggable per-point
classifier; the shipped default is a geometric cylinder test standing in
for a learned segmentation model. A subprocess/file backend lets an
external model plug in without code changes.
"""

from __future__ import annotations

import logging
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .clustering import euclidean_components
from .cloud import PointCloud, SpatialIndex
from .descriptors import DescriptorSet
from .errors import ArgumentError

log = logging.getLogger(__name__)

DEFAULT_CURVATURE_PERCENTILE = 0.90
DEFAULT_MIN_CLUSTER_POINTS = 100
DEFAULT_PASSTHROUGH_POINTS = 400
DEFAULT_ROI_RADIUS = 0.15

# Geometric baseline gates; only the exposed-length window is field-sourced.
BASELINE_MIN_ELONGATION = 5.0
BASELINE_LENGTH_RANGE = (0.05, 0.25)
BASELINE_MAX_RADIAL_RMS = 0.03
_STEEP_ELONGATION = 2.0     # per elongation unit
_STEEP_LENGTH = 100.0       # per metre
_STEEP_RADIAL = 150.0       # per metre
_OFF_AXIS_FACTOR = 0.1


@dataclass(frozen=True)
class CandidateCluster:
    member_indices: np.ndarray
    centroid: np.ndarray
    origin: str  # "direct-passthrough" | "roi-expanded"

    @property
    def size(self) -> int:
        return self.member_indices.shape[0]


@dataclass(frozen=True)
class BoltSegmentation:
    """Per-candidate-point probabilities and the 0.5-rule labels."""

    point_indices: np.ndarray
    probabilities: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return self.probabilities > 0.5

    @property
    def bolt_indices(self) -> np.ndarray:
        return self.point_indices[self.labels]


@dataclass(frozen=True)
class DetectionMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    point_iou: float
    point_precision: float


def filter_bolt_candidates(
    cloud: PointCloud,
    desc: DescriptorSet,
    support_radius: float,
    percentile: float = DEFAULT_CURVATURE_PERCENTILE,
    min_size: int = DEFAULT_MIN_CLUSTER_POINTS,
    passthrough_size: int = DEFAULT_PASSTHROUGH_POINTS,
    roi_radius: float = DEFAULT_ROI_RADIUS,
    index: SpatialIndex | None = None,
) -> list[CandidateCluster]:
    """High-curvature points -> connected components -> size rules.

    Clusters larger than passthrough_size pass through as-is; mid-size
    clusters are replaced by all cloud points within roi_radius of their
    centroid; clusters below min_size are discarded.
    """
    if not (0.0 < percentile < 1.0):
        raise ArgumentError(f"percentile must be in (0, 1), got {percentile}")
    valid = ~desc.degenerate
    threshold = float(np.quantile(desc.curvature[valid], percentile))
    high = np.flatnonzero(valid & (desc.curvature > threshold))
    comp = euclidean_components(cloud, high, support_radius)
    if index is None and comp.cluster_count:
        index = SpatialIndex(cloud)
    out: list[CandidateCluster] = []
    for cid in range(comp.cluster_count):
        members = high[comp.members(cid)]
        if members.size < min_size:
            continue
        centroid = cloud.points[members].mean(axis=0)
        if members.size > passthrough_size:
            out.append(CandidateCluster(members, centroid, "direct-passthrough"))
        else:
            roi = index.radius(centroid, roi_radius)
            out.append(CandidateCluster(roi, centroid, "roi-expanded"))
    return out


class BoltClassifier(Protocol):
    """Stage-2 backend: per-point bolt probability for one candidate cluster."""

    def score(self, points: np.ndarray) -> np.ndarray: ...


def classify_bolt_points(
    candidates: list[CandidateCluster],
    cloud: PointCloud,
    desc: DescriptorSet,
    backend: BoltClassifier,
) -> BoltSegmentation:
    """Run the backend over each candidate; overlapping candidates combine
    by maximum probability. A backend failure marks that cluster non-bolt."""
    probs: dict[int, float] = {}
    for ci, cand in enumerate(candidates):
        pts = cloud.points[cand.member_indices]
        try:
            p = np.clip(np.asarray(backend.score(pts), dtype=np.float64), 0.0, 1.0)
            if p.shape != (cand.size,):
                raise ValueError(f"backend returned shape {p.shape} for {cand.size} points")
        except Exception:
            log.exception("classifier backend failed on candidate %d; labelling non-bolt", ci)
            p = np.zeros(cand.size)
        for idx, pi in zip(cand.member_indices, p):
            prev = probs.get(int(idx))
            if prev is None or pi > prev:
                probs[int(idx)] = float(pi)
    if not probs:
        return BoltSegmentation(np.empty(0, dtype=np.intp), np.empty(0))
    order = np.array(sorted(probs), dtype=np.intp)
    return BoltSegmentation(order, np.array([probs[int(i)] for i in order]))


def _ramp(margin: float, steepness: float) -> float:
    """1.0 when the criterion is met (margin >= 0), logistic decay below."""
    return min(1.0, 2.0 / (1.0 + np.exp(-steepness * margin)))


class BaselineCylinderClassifier:
    """Geometric stand-in for the learned stage: PCA elongation, axial
    extent and radial RMS gates, each smoothly ramped."""

    def score(self, points: np.ndarray) -> np.ndarray:
        n = points.shape[0]
        if n < 10:
            return np.zeros(n)
        centroid = points.mean(axis=0)
        rel = points - centroid
        cov = rel.T @ rel / (n - 1)
        try:
            w, v = np.linalg.eigh(cov)
        except np.linalg.LinAlgError:
            return np.zeros(n)
        if w[2] <= 0.0:
            return np.zeros(n)
        axis = v[:, 2]
        elongation = w[2] / max(w[1], 1e-18)
        s = rel @ axis
        length = float(s.max() - s.min())
        radial = rel - s[:, None] * axis
        radial_d = np.linalg.norm(radial, axis=1)
        radial_rms = float(np.sqrt(np.mean(radial_d**2)))

        p = (
            _ramp(elongation - BASELINE_MIN_ELONGATION, _STEEP_ELONGATION)
            * _ramp(length - BASELINE_LENGTH_RANGE[0], _STEEP_LENGTH)
            * _ramp(BASELINE_LENGTH_RANGE[1] - length, _STEEP_LENGTH)
            * _ramp(BASELINE_MAX_RADIAL_RMS - radial_rms, _STEEP_RADIAL)
        )
        out = np.full(n, p)
        out[radial_d > 3.0 * radial_rms] *= _OFF_AXIS_FACTOR
        return out


class ConstantClassifier:
    def __init__(self, value: float):
        self.value = float(value)

    def score(self, points: np.ndarray) -> np.ndarray:
        return np.full(points.shape[0], self.value)


class SubprocessClassifier:
    """File-protocol backend: writes the candidate as a PLY, invokes an
    external command as ``cmd <in.ply> <out.txt>`` and reads one
    probability per line back."""

    def __init__(self, command: list[str]):
        self.command = list(command)

    def score(self, points: np.ndarray) -> np.ndarray:
        from .io import save_cloud  # local import to avoid a cycle

        with tempfile.TemporaryDirectory(prefix="rockmap-bolt-") as tmp:
            in_path = Path(tmp) / "candidate.ply"
            out_path = Path(tmp) / "probabilities.txt"
            save_cloud(PointCloud(points), in_path, format="ply-binary-le")
            subprocess.run(
                [*self.command, str(in_path), str(out_path)],
                check=True,
                capture_output=True,
            )
            probs = np.loadtxt(out_path, ndmin=1)
        if probs.shape[0] != points.shape[0]:
            raise ValueError(
                f"backend wrote {probs.shape[0]} probabilities for {points.shape[0]} points"
            )
        return probs


_CLASSIFIER_REGISTRY: dict[str, Callable[..., BoltClassifier]] = {
    "baseline": BaselineCylinderClassifier,
    "subprocess": SubprocessClassifier,
}


def get_classifier(name: str, **kwargs) -> BoltClassifier:
    try:
        factory = _CLASSIFIER_REGISTRY[name]
    except KeyError:
        raise ArgumentError(
            f"unknown classifier {name!r}; registered: {sorted(_CLASSIFIER_REGISTRY)}"
        ) from None
    return factory(**kwargs)


def register_classifier(name: str, factory: Callable[..., BoltClassifier]) -> None:
    _CLASSIFIER_REGISTRY[name] = factory


def evaluate_detection(
    predicted: list[np.ndarray],
    truth: list[np.ndarray],
    match_iou: float = 0.5,
) -> DetectionMetrics:
    """Greedy highest-IoU matching of predicted vs truth point clusters,
    plus point-level IoU / precision over the unions."""
    pred_sets = [frozenset(np.asarray(c).tolist()) for c in predicted]
    truth_sets = [frozenset(np.asarray(c).tolist()) for c in truth]
    scored = []
    for pi, ps in enumerate(pred_sets):
        for ti, ts in enumerate(truth_sets):
            inter = len(ps & ts)
            if inter == 0:
                continue
            iou = inter / len(ps | ts)
            if iou >= match_iou:
                scored.append((-iou, pi, ti))
    scored.sort()
    used_p, used_t = set(), set()
    tp = 0
    for _, pi, ti in scored:
        if pi in used_p or ti in used_t:
            continue
        used_p.add(pi)
        used_t.add(ti)
        tp += 1
    fp = len(pred_sets) - tp
    fn = len(truth_sets) - tp
    pred_union = frozenset().union(*pred_sets) if pred_sets else frozenset()
    truth_union = frozenset().union(*truth_sets) if truth_sets else frozenset()
    inter = len(pred_union & truth_union)
    union = len(pred_union | truth_union)
    return DetectionMetrics(
        tp=tp,
        fp=fp,
        fn=fn,
        precision=tp / (tp + fp) if tp + fp else 0.0,
        recall=tp / (tp + fn) if tp + fn else 0.0,
        point_iou=inter / union if union else 0.0,
        point_precision=inter / len(pred_union) if pred_union else 0.0,
    )


def metrics_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float]:
    """Standard precision / recall from object counts."""
    return tp / (tp + fp), tp / (tp + fn)
