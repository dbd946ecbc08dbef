"""Integration layer: equal-angle stereonet, coverage analysis, and 3D
scene export of fitted planes and bolt cylinders.

All emitters produce deterministic byte streams; floats are printed with 6
significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bolt_geometry import BoltVector
from .errors import ArgumentError
from .structure import DiscontinuityPlane, orientation_to_normal

DEFAULT_CONE_RADIUS_DEG = 15.0
BOLT_RENDER_LENGTH = 2.0     # display convention only; true length is kept on the record
BOLT_RENDER_DIAMETER = 0.02
BOLT_PRISM_SIDES = 16

# fixed 12-colour palette, cycled by set id
SET_PALETTE = [
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207), (174, 199, 232), (255, 187, 120),
]
BOLT_COLOR = (200, 30, 30)

# 5-stop viridis-like ramp, linearly interpolated
_RAMP_STOPS = [
    (68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37),
]


def set_color(set_id: int):
    return SET_PALETTE[set_id % len(SET_PALETTE)]


def ramp_color(t: float):
    """Colour for t in [0, 1] on the viridis-like ramp."""
    t = min(max(t, 0.0), 1.0)
    x = t * (len(_RAMP_STOPS) - 1)
    i = min(int(x), len(_RAMP_STOPS) - 2)
    f = x - i
    a, b = _RAMP_STOPS[i], _RAMP_STOPS[i + 1]
    return tuple(int(round(a[c] + (b[c] - a[c]) * f)) for c in range(3))


# ------------------------------------------------------------- stereonet

def stereonet_project(dip_angle, dip_direction):
    """Equal-angle lower-hemisphere map: R = tan(DA/2), azimuth = DD."""
    da = np.radians(np.asarray(dip_angle, dtype=np.float64))
    dd = np.radians(np.asarray(dip_direction, dtype=np.float64))
    r = np.tan(da / 2.0)
    return r * np.sin(dd), r * np.cos(dd)


def stereonet_invert(x, y):
    """Inverse of stereonet_project; the centre maps to DA=0 with DD=0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = np.hypot(x, y)
    da = np.degrees(2.0 * np.arctan(r))
    dd = np.degrees(np.arctan2(x, y)) % 360.0
    return da, dd


# ------------------------------------------------------------- coverage

@dataclass(frozen=True)
class SetEnvelope:
    set_id: int
    dip_angle: float
    dip_direction: float
    cone_radius_deg: float = DEFAULT_CONE_RADIUS_DEG

    def __post_init__(self):
        if not (0.0 < self.cone_radius_deg < 90.0):
            raise ArgumentError("cone radius must be in (0, 90) degrees")

    @property
    def mean_pole(self) -> np.ndarray:
        return orientation_to_normal(self.dip_angle, self.dip_direction)


@dataclass(frozen=True)
class CoverageReport:
    bolts_outside_all_sets: list[int]
    unsupported_sets: list[int]
    per_set_counts: dict[int, int]


def line_angle_deg(u, v) -> float:
    """Acute angle between two axes (sign-insensitive), in [0, 90] degrees."""
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(c, 1.0)))


def coverage_analysis(
    bolts: list[BoltVector], envelopes: list[SetEnvelope]
) -> CoverageReport:
    """A bolt is inside a set when the line angle between its axis and the
    set's mean pole is within the cone radius (tested in 3D, not on the
    projected disc)."""
    counts = {env.set_id: 0 for env in envelopes}
    outside = []
    for bolt in bolts:
        hit = False
        for env in envelopes:
            if line_angle_deg(bolt.axis, env.mean_pole) <= env.cone_radius_deg:
                counts[env.set_id] += 1
                hit = True
        if not hit:
            outside.append(bolt.bolt_id)
    unsupported = [sid for sid, c in counts.items() if c == 0]
    return CoverageReport(outside, unsupported, counts)


# ------------------------------------------------------------- SVG

def _f(v: float) -> str:
    return f"{v:.6g}"


def render_stereonet_svg(
    poles,
    bolts,
    envelopes,
    path,
    size: int = 640,
    plane_counts: dict[int, int] | None = None,
    flip_pole_azimuth: bool = False,
) -> None:
    """Deterministic SVG stereonet: primitive circle, 10-degree graticule,
    set-coloured poles, bolt markers, envelope circles and a legend.

    poles: iterable of (set_id, dip_angle, dip_direction);
    bolts: iterable of (bolt_id, dip_angle, dip_direction).
    flip_pole_azimuth plots poles at DD+180 for the opposite convention.
    """
    c = size / 2.0
    rad = size * 0.42

    def to_canvas(da, dd):
        if flip_pole_azimuth:
            dd = (dd + 180.0) % 360.0
        x, y = stereonet_project(da, dd)
        return c + float(x) * rad, c - float(y) * rad

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    # graticule: dip-angle circles every 10 degrees
    for da in range(10, 91, 10):
        r = math.tan(math.radians(da) / 2.0) * rad
        stroke = "#222" if da == 90 else "#ccc"
        parts.append(
            f'<circle cx="{_f(c)}" cy="{_f(c)}" r="{_f(r)}" fill="none" '
            f'stroke="{stroke}" stroke-width="1"/>'
        )
    # azimuth rays every 10 degrees
    for dd in range(0, 360, 10):
        x, y = to_canvas(90.0, float(dd)) if not flip_pole_azimuth else (
            c + math.sin(math.radians(dd)) * rad, c - math.cos(math.radians(dd)) * rad
        )
        parts.append(
            f'<line x1="{_f(c)}" y1="{_f(c)}" x2="{_f(x)}" y2="{_f(y)}" '
            f'stroke="#eee" stroke-width="1"/>'
        )
    parts.append(
        f'<text x="{_f(c)}" y="{_f(c - rad - 8)}" text-anchor="middle" '
        f'font-size="14" font-family="sans-serif">N</text>'
    )
    # envelope cones as projected circles (drawn point-wise to stay honest
    # about the projection's distortion of off-centre circles)
    for env in sorted(envelopes, key=lambda e: e.set_id):
        col = "rgb(%d,%d,%d)" % set_color(env.set_id)
        ring = []
        for step in range(73):
            da, dd = _cone_rim(env, step * 5.0)
            x, y = to_canvas(da, dd)
            ring.append(f"{_f(x)},{_f(y)}")
        parts.append(
            f'<polygon points="{" ".join(ring)}" fill="{col}" fill-opacity="0.12" '
            f'stroke="{col}" stroke-dasharray="4 3" stroke-width="1.2"/>'
        )
    for set_id, da, dd in poles:
        col = "rgb(%d,%d,%d)" % set_color(set_id)
        x, y = to_canvas(da, dd)
        parts.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3" fill="{col}"/>')
    for _bolt_id, da, dd in bolts:
        x, y = to_canvas(da, dd)
        parts.append(
            f'<path d="M {_f(x - 4)} {_f(y + 3.5)} L {_f(x + 4)} {_f(y + 3.5)} '
            f'L {_f(x)} {_f(y - 4.5)} Z" fill="none" '
            f'stroke="rgb(%d,%d,%d)" stroke-width="1.5"/>' % BOLT_COLOR
        )
    # legend
    ly = 18
    for env in sorted(envelopes, key=lambda e: e.set_id):
        col = "rgb(%d,%d,%d)" % set_color(env.set_id)
        n_planes = (plane_counts or {}).get(env.set_id)
        label = f"set {env.set_id}" + (f" ({n_planes} planes)" if n_planes is not None else "")
        parts.append(f'<circle cx="12" cy="{ly - 4}" r="4" fill="{col}"/>')
        parts.append(
            f'<text x="22" y="{ly}" font-size="12" font-family="sans-serif">{label}</text>'
        )
        ly += 16
    parts.append("</svg>")
    with open(path, "wb") as f:
        f.write(("\n".join(parts) + "\n").encode("utf-8"))


def _cone_rim(env: SetEnvelope, phi_deg: float):
    """Orientation on the rim of the envelope cone at rim parameter phi."""
    pole = env.mean_pole
    ref = np.array([0.0, 0.0, 1.0])
    if abs(pole[2]) > 0.99:
        ref = np.array([1.0, 0.0, 0.0])
    e1 = np.cross(pole, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(pole, e1)
    alpha = math.radians(env.cone_radius_deg)
    phi = math.radians(phi_deg)
    v = (math.cos(alpha) * pole
         + math.sin(alpha) * (math.cos(phi) * e1 + math.sin(phi) * e2))
    if v[2] < 0:
        v = -v
    from .structure import orientation_transform

    pair = orientation_transform(v[None] / np.linalg.norm(v))
    return float(pair.dip_angle[0]), float(pair.dip_direction[0])


# ------------------------------------------------------------- scene export

def export_scene(
    planes: list[DiscontinuityPlane],
    bolts: list[BoltVector],
    path,
    metric: str = "none",
    format: str = "ply",
) -> None:
    """Planes as set-coloured bounded rectangles, bolts as 2 m x 20 mm
    16-sided prisms anchored at the centroid along the axis. ``metric``
    colours bolts on the ramp over that metric's min-max."""
    if metric not in ("none", "exposed_length", "deviation"):
        raise ArgumentError(f"unknown metric {metric!r}")
    if format not in ("ply", "obj"):
        raise ArgumentError(f"unknown format {format!r}")

    vertices: list[tuple[float, float, float]] = []
    colors: list[tuple[int, int, int]] = []
    faces: list[tuple[int, ...]] = []

    for plane in planes:
        base = len(vertices)
        col = set_color(plane.set_id)
        for corner in plane.corners:
            vertices.append(tuple(corner))
            colors.append(col)
        faces.append((base, base + 1, base + 2, base + 3))

    values = None
    if metric != "none" and bolts:
        values = np.array(
            [b.exposed_length if metric == "exposed_length" else b.deviation_deg
             for b in bolts]
        )
        vmin, vmax = float(values.min()), float(values.max())
        span = vmax - vmin

    for bi, bolt in enumerate(bolts):
        if values is None:
            col = BOLT_COLOR
        else:
            t = 0.0 if span == 0.0 else (float(values[bi]) - vmin) / span
            col = ramp_color(t)
        base = len(vertices)
        ring0, ring1 = _prism_rings(bolt.centroid, bolt.axis)
        for p in ring0 + ring1:
            vertices.append(tuple(p))
            colors.append(col)
        k = BOLT_PRISM_SIDES
        for s in range(k):
            sn = (s + 1) % k
            faces.append((base + s, base + sn, base + k + sn, base + k + s))

    if format == "ply":
        _write_mesh_ply(path, vertices, colors, faces)
    else:
        _write_mesh_obj(path, vertices, colors, faces)


def _prism_rings(anchor: np.ndarray, axis: np.ndarray):
    a = axis / np.linalg.norm(axis)
    ref = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(a, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    r = BOLT_RENDER_DIAMETER / 2.0
    ring0, ring1 = [], []
    for s in range(BOLT_PRISM_SIDES):
        ang = 2.0 * math.pi * s / BOLT_PRISM_SIDES
        off = r * (math.cos(ang) * e1 + math.sin(ang) * e2)
        ring0.append(anchor + off)
        ring1.append(anchor + BOLT_RENDER_LENGTH * a + off)
    return ring0, ring1


def _write_mesh_ply(path, vertices, colors, faces) -> None:
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(vertices)}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    lines = header[:]
    for (x, y, z), (r, g, b) in zip(vertices, colors):
        lines.append(f"{_f(x)} {_f(y)} {_f(z)} {r} {g} {b}")
    for face in faces:
        lines.append(f"{len(face)} " + " ".join(str(i) for i in face))
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))


def _write_mesh_obj(path, vertices, colors, faces) -> None:
    lines = []
    for (x, y, z), (r, g, b) in zip(vertices, colors):
        lines.append(
            f"v {_f(x)} {_f(y)} {_f(z)} {_f(r / 255)} {_f(g / 255)} {_f(b / 255)}"
        )
    for face in faces:
        lines.append("f " + " ".join(str(i + 1) for i in face))
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
