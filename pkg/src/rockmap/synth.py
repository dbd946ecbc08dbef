"""Synthetic tunnel generator with planted ground truth.

Stands in for unavailable field scans: facets are planar rectangles at
requested orientations, bolts are open cylinders protruding from surfaces,
and every generated point carries a truth label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import ArgumentError, ParseError
from .structure import orientation_to_normal

LABEL_FLOOR = 0
LABEL_FACET = 1
LABEL_BOLT = 2
LABEL_NOISE = 3
_LABEL_NAMES = {LABEL_FLOOR: "floor", LABEL_FACET: "facet",
                LABEL_BOLT: "bolt", LABEL_NOISE: "noise"}
_LABEL_CODES = {v: k for k, v in _LABEL_NAMES.items()}

MIN_BOLT_BASE_SEPARATION = 0.35  # keeps ROI spheres of adjacent bolts disjoint


@dataclass(frozen=True)
class SetSpec:
    dip_angle: float
    dip_direction: float
    facet_count: int
    facet_size: float  # edge length of each square facet, metres


@dataclass(frozen=True)
class BoltSpec:
    base: tuple[float, float, float]
    axis: tuple[float, float, float]   # points away from the surface
    length: float
    radius: float = 0.01


@dataclass(frozen=True)
class SceneSpec:
    width: float = 10.0
    height: float = 5.0
    length: float = 20.0
    sets: list[SetSpec] = field(default_factory=list)
    bolts: list[BoltSpec] = field(default_factory=list)
    noise_sigma: float = 0.001
    density: float = 20000.0  # points per square metre
    floor: bool = False
    walls: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.density <= 0:
            raise ArgumentError("density must be positive")
        for b in self.bolts:
            if not (0.0 < b.length <= 1.0):
                raise ArgumentError(f"bolt length {b.length} outside (0, 1] m")


@dataclass(frozen=True)
class GroundTruth:
    kind: np.ndarray       # per point, LABEL_* codes
    set_id: np.ndarray     # facet points only, else -1
    plane_id: np.ndarray   # facet points only, else -1
    bolt_id: np.ndarray    # bolt points only, else -1
    plane_truth: list[dict]  # per plane: set_id, dip_angle, dip_direction, centroid
    bolt_truth: list[dict]   # per bolt: base, axis, length, radius

    def indices(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.kind == kind)

    def bolt_members(self, bolt_id: int) -> np.ndarray:
        return np.flatnonzero(self.bolt_id == bolt_id)

    def plane_members(self, plane_id: int) -> np.ndarray:
        return np.flatnonzero(self.plane_id == plane_id)


def generate_scene(spec: SceneSpec) -> tuple[PointCloud, GroundTruth]:
    """Deterministic under spec.seed; all randomness flows from one RNG."""
    _check_bolt_conflicts(spec)
    rng = np.random.default_rng(spec.seed)
    chunks: list[np.ndarray] = []
    kinds: list[np.ndarray] = []
    set_ids: list[np.ndarray] = []
    plane_ids: list[np.ndarray] = []
    bolt_ids: list[np.ndarray] = []
    plane_truth: list[dict] = []
    bolt_truth: list[dict] = []

    def push(pts, kind, set_id=-1, plane_id=-1, bolt_id=-1):
        n = pts.shape[0]
        chunks.append(pts)
        kinds.append(np.full(n, kind, dtype=np.int8))
        set_ids.append(np.full(n, set_id, dtype=np.int32))
        plane_ids.append(np.full(n, plane_id, dtype=np.int32))
        bolt_ids.append(np.full(n, bolt_id, dtype=np.int32))

    if spec.floor:
        push(_sample_rectangle(
            rng, np.array([spec.width / 2, spec.length / 2, 0.0]),
            np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]),
            spec.width, spec.length, spec.density,
        ), LABEL_FLOOR)

    if spec.walls:
        for center, e1, e2, w, h in (
            (np.array([0.0, spec.length / 2, spec.height / 2]),
             np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]),
             spec.length, spec.height),
            (np.array([spec.width, spec.length / 2, spec.height / 2]),
             np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]),
             spec.length, spec.height),
        ):
            push(_sample_rectangle(rng, center, e1, e2, w, h, spec.density),
                 LABEL_NOISE)

    for si, sset in enumerate(spec.sets):
        normal = orientation_to_normal(sset.dip_angle, sset.dip_direction)
        e1 = np.cross(normal, [0.0, 0.0, 1.0])
        if np.linalg.norm(e1) < 1e-6:
            e1 = np.cross(normal, [1.0, 0.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(normal, e1)
        for _ in range(sset.facet_count):
            center = np.array([
                rng.uniform(0.1 * spec.width, 0.9 * spec.width),
                rng.uniform(0.1 * spec.length, 0.9 * spec.length),
                rng.uniform(0.55 * spec.height, spec.height),
            ])
            pid = len(plane_truth)
            pts = _sample_rectangle(
                rng, center, e1, e2, sset.facet_size, sset.facet_size, spec.density
            )
            push(pts, LABEL_FACET, set_id=si, plane_id=pid)
            plane_truth.append({
                "set_id": si,
                "dip_angle": sset.dip_angle,
                "dip_direction": sset.dip_direction,
                "centroid": center.tolist(),
            })

    for bi, bolt in enumerate(spec.bolts):
        pts = _sample_bolt(rng, bolt, spec.density)
        push(pts, LABEL_BOLT, bolt_id=bi)
        axis = np.asarray(bolt.axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        bolt_truth.append({
            "base": list(bolt.base),
            "axis": axis.tolist(),
            "length": bolt.length,
            "radius": bolt.radius,
        })

    if not chunks:
        raise ArgumentError("scene spec generates no points")
    pts = np.concatenate(chunks)
    if spec.noise_sigma > 0:
        pts = pts + rng.normal(0.0, spec.noise_sigma, size=pts.shape)
    truth = GroundTruth(
        kind=np.concatenate(kinds),
        set_id=np.concatenate(set_ids),
        plane_id=np.concatenate(plane_ids),
        bolt_id=np.concatenate(bolt_ids),
        plane_truth=plane_truth,
        bolt_truth=bolt_truth,
    )
    return PointCloud(pts), truth


def _check_bolt_conflicts(spec: SceneSpec) -> None:
    bases = np.array([b.base for b in spec.bolts], dtype=np.float64).reshape(-1, 3)
    for i in range(len(bases)):
        for j in range(i + 1, len(bases)):
            if np.linalg.norm(bases[i] - bases[j]) < MIN_BOLT_BASE_SEPARATION:
                raise ArgumentError(
                    f"bolts {i} and {j} are closer than {MIN_BOLT_BASE_SEPARATION} m"
                )


def _sample_rectangle(rng, center, e1, e2, w, h, density) -> np.ndarray:
    """Jittered-grid sampling: scanner returns lie near a regular raster, not
    a uniform random scatter, and local neighbourhood statistics depend on it."""
    s = 1.0 / np.sqrt(density)
    u = np.arange(-w / 2 + s / 2, w / 2, s)
    v = np.arange(-h / 2 + s / 2, h / 2, s)
    gu, gv = np.meshgrid(u, v, indexing="ij")
    uu = gu.ravel() + rng.uniform(-0.3 * s, 0.3 * s, gu.size)
    vv = gv.ravel() + rng.uniform(-0.3 * s, 0.3 * s, gv.size)
    if uu.size == 0:
        uu = np.zeros(1)
        vv = np.zeros(1)
    return center + uu[:, None] * e1 + vv[:, None] * e2


def _sample_bolt(rng, bolt: BoltSpec, density) -> np.ndarray:
    """Lateral cylinder surface plus the free end cap; the base cap sits
    flush against rock and is never seen by a scanner."""
    base = np.asarray(bolt.base, dtype=np.float64)
    axis = np.asarray(bolt.axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(axis, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)

    # lateral surface as a jittered grid on the unrolled cylinder
    s = 1.0 / np.sqrt(density)
    circumference = 2.0 * np.pi * bolt.radius
    n_ang = max(3, int(round(circumference / s)))
    ax_steps = np.arange(s / 2, bolt.length, s)
    if ax_steps.size == 0:
        ax_steps = np.array([bolt.length / 2.0])
    ga, gt = np.meshgrid(ax_steps, np.arange(n_ang), indexing="ij")
    h = ga.ravel() + rng.uniform(-0.3 * s, 0.3 * s, ga.size)
    ang = (gt.ravel() + rng.uniform(-0.3, 0.3, gt.size)) * (2.0 * np.pi / n_ang)
    side = (base + h[:, None] * axis
            + bolt.radius * (np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2))

    # free end cap: jittered grid clipped to the disc
    cap_u = np.arange(-bolt.radius + s / 2, bolt.radius, s)
    if cap_u.size == 0:
        cap_u = np.zeros(1)
    gu, gv = np.meshgrid(cap_u, cap_u, indexing="ij")
    cu = gu.ravel() + rng.uniform(-0.3 * s, 0.3 * s, gu.size)
    cv = gv.ravel() + rng.uniform(-0.3 * s, 0.3 * s, gv.size)
    keep = cu**2 + cv**2 <= bolt.radius**2
    cu, cv = cu[keep], cv[keep]
    cap = base + bolt.length * axis + cu[:, None] * e1 + cv[:, None] * e2
    if cap.shape[0] == 0:
        cap = (base + bolt.length * axis)[None]
    return np.concatenate([side, cap])


# ----------------------------------------------------------- label sidecar

def save_labels(truth: GroundTruth, path) -> None:
    """Text sidecar: 'index kind set_id plane_id bolt_id' per point."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("# index kind set_id plane_id bolt_id\n")
        for i in range(truth.kind.shape[0]):
            f.write(
                f"{i} {_LABEL_NAMES[int(truth.kind[i])]} "
                f"{truth.set_id[i]} {truth.plane_id[i]} {truth.bolt_id[i]}\n"
            )


def load_labels(path) -> GroundTruth:
    kinds, sids, pids, bids = [], [], [], []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5 or parts[1] not in _LABEL_CODES:
                raise ParseError("bad label record", line=lineno)
            kinds.append(_LABEL_CODES[parts[1]])
            sids.append(int(parts[2]))
            pids.append(int(parts[3]))
            bids.append(int(parts[4]))
    return GroundTruth(
        kind=np.array(kinds, dtype=np.int8),
        set_id=np.array(sids, dtype=np.int32),
        plane_id=np.array(pids, dtype=np.int32),
        bolt_id=np.array(bids, dtype=np.int32),
        plane_truth=[],
        bolt_truth=[],
    )
