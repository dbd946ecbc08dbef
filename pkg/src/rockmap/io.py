"""Point cloud file I/O: PLY (ascii / binary little-endian) and XYZ text.

Only the "vertex" element is consumed; scalar vertex properties other than
x, y, z are preserved as attribute channels. Writers emit deterministic
byte streams for a fixed input.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import ArgumentError, DataError, ParseError

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

FORMATS = ("ply-ascii", "ply-binary-le", "xyz-text")


def load_cloud(path, format: str | None = None) -> PointCloud:
    """Load a point cloud, inferring the format from the extension if not given."""
    path = Path(path)
    if format is None:
        format = "xyz-text" if path.suffix.lower() in (".xyz", ".txt") else "ply"
    if format == "xyz-text":
        return _load_xyz(path)
    if format in ("ply", "ply-ascii", "ply-binary-le"):
        cloud, fmt = _load_ply(path)
        if format != "ply" and fmt != format:
            raise ParseError(f"expected {format} but file is {fmt}")
        return cloud
    raise ArgumentError(f"unknown format {format!r}")


def save_cloud(cloud: PointCloud, path, format: str = "ply-binary-le") -> None:
    path = Path(path)
    if format == "xyz-text":
        _save_xyz(cloud, path)
    elif format == "ply-ascii":
        _save_ply(cloud, path, binary=False)
    elif format == "ply-binary-le":
        _save_ply(cloud, path, binary=True)
    else:
        raise ArgumentError(f"unknown format {format!r}")


# ---------------------------------------------------------------- XYZ text

def _load_xyz(path: Path) -> PointCloud:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ParseError("expected at least 3 columns", line=lineno)
            try:
                rows.append([float(parts[0]), float(parts[1]), float(parts[2])])
            except ValueError:
                raise ParseError("non-numeric coordinate", line=lineno) from None
    pts = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    if pts.size and not np.isfinite(pts).all():
        raise DataError("non-finite coordinate in XYZ file")
    return PointCloud(pts)


def _save_xyz(cloud: PointCloud, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for x, y, z in cloud.points:
            f.write(f"{x:.8f} {y:.8f} {z:.8f}\n")


# ---------------------------------------------------------------- PLY

def _load_ply(path: Path):
    with open(path, "rb") as f:
        data = f.read()
    # Header is ascii, terminated by end_header.
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError("not a PLY file (missing 'ply'/'end_header')", line=1)
    nl = data.find(b"\n", end)
    if nl < 0:
        raise ParseError("unterminated header", offset=end)
    body_offset = nl + 1
    header_lines = data[:end].decode("ascii", errors="replace").splitlines()

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype_code or None-for-list)])
    for lineno, raw in enumerate(header_lines, start=1):
        tokens = raw.strip().split()
        if not tokens or tokens[0] in ("ply", "comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2:
                raise ParseError("bad format line", line=lineno)
            if tokens[1] == "ascii":
                fmt = "ply-ascii"
            elif tokens[1] == "binary_little_endian":
                fmt = "ply-binary-le"
            else:
                raise ParseError(f"unsupported PLY format {tokens[1]!r}", line=lineno)
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError("bad element line", line=lineno)
            try:
                count = int(tokens[2])
            except ValueError:
                raise ParseError("bad element count", line=lineno) from None
            elements.append((tokens[1], count, []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            if tokens[1] == "list":
                elements[-1][2].append((tokens[-1], None))
            else:
                if tokens[1] not in _PLY_TYPES:
                    raise ParseError(f"unknown property type {tokens[1]!r}", line=lineno)
                elements[-1][2].append((tokens[2], _PLY_TYPES[tokens[1]]))
    if fmt is None:
        raise ParseError("missing format line", line=1)

    for ei, (name, count, props) in enumerate(elements):
        if name == "vertex":
            if ei != 0:
                raise ParseError("vertex must be the first element")
            if any(code is None for _, code in props):
                raise ParseError("list property on vertex element is unsupported")
            names = [p for p, _ in props]
            for ax in ("x", "y", "z"):
                if ax not in names:
                    raise ParseError(f"vertex element lacks property '{ax}'")
            if fmt == "ply-ascii":
                rec = _read_ascii_records(data, body_offset, count, len(props))
                cols = {p: rec[:, i] for i, (p, _) in enumerate(props)}
            else:
                dt = np.dtype([(p, "<" + code) for p, code in props])
                need = dt.itemsize * count
                if len(data) - body_offset < need:
                    raise ParseError(
                        "truncated binary vertex data", offset=len(data)
                    )
                arr = np.frombuffer(data, dtype=dt, count=count, offset=body_offset)
                cols = {p: arr[p].astype(np.float64) for p, _ in props}
            pts = np.column_stack([cols["x"], cols["y"], cols["z"]])
            if pts.size and not np.isfinite(pts).all():
                raise DataError("non-finite coordinate in PLY vertex data")
            attrs = {p: cols[p] for p in cols if p not in ("x", "y", "z")}
            return PointCloud(pts, attrs), fmt
    raise ParseError("no vertex element in PLY file")


def _read_ascii_records(data: bytes, offset: int, count: int, ncols: int) -> np.ndarray:
    text = data[offset:].decode("ascii", errors="replace")
    out = np.empty((count, ncols), dtype=np.float64)
    lines = text.splitlines()
    if len(lines) < count:
        raise ParseError(f"expected {count} vertex records, found {len(lines)}")
    for i in range(count):
        parts = lines[i].split()
        if len(parts) < ncols:
            raise ParseError("short vertex record", line=i + 1)
        try:
            out[i] = [float(v) for v in parts[:ncols]]
        except ValueError:
            raise ParseError("non-numeric vertex value", line=i + 1) from None
    return out


def _save_ply(cloud: PointCloud, path: Path, binary: bool) -> None:
    n = len(cloud)
    attrs = cloud.attributes
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    header += ["property double x", "property double y", "property double z"]
    for name in attrs:
        header.append(f"property double {name}")
    header.append("end_header")
    columns = [cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2]]
    columns += [np.asarray(attrs[name], dtype=np.float64) for name in attrs]
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            table = np.column_stack(columns).astype("<f8")
            f.write(table.tobytes())
        else:
            for row in zip(*columns):
                f.write((" ".join(f"{v:.8f}" for v in row) + "\n").encode("ascii"))
