"""Mesh ingestion: binary STL and the v/f subset of ASCII OBJ.

STL: 80-byte header, u32 triangle count, then 50-byte records
(normal 3xf32, three vertices 3xf32 each, u16 attribute).  Duplicate
vertices are merged by exact coordinate equality so loading is
deterministic.  OBJ: only ``v`` and ``f`` lines are honored; faces with
more than three (1-based) indices are fan-triangulated; negative indices
are rejected.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from hybridsync.geometry.mesh import TriangleMesh

STL_HEADER_LEN = 80
STL_RECORD_LEN = 50


class MeshParseError(ValueError):
    pass


def load_mesh(data: bytes, fmt: str) -> TriangleMesh:
    if fmt == "stl":
        return _load_binary_stl(data)
    if fmt == "obj":
        return _load_ascii_obj(data)
    raise ValueError(f"unsupported mesh format {fmt!r} (expected 'stl' or 'obj')")


def load_mesh_path(path) -> TriangleMesh:
    path = Path(path)
    suffix = path.suffix.lower().lstrip(".")
    if suffix not in ("stl", "obj"):
        raise ValueError(f"cannot infer mesh format from {path.name!r}")
    return load_mesh(path.read_bytes(), suffix)


def _load_binary_stl(data: bytes) -> TriangleMesh:
    if len(data) < STL_HEADER_LEN + 4:
        raise MeshParseError(
            f"truncated STL: need {STL_HEADER_LEN + 4} header bytes, got {len(data)}"
        )
    (count,) = struct.unpack_from("<I", data, STL_HEADER_LEN)
    expected = STL_HEADER_LEN + 4 + count * STL_RECORD_LEN
    if len(data) < expected:
        raise MeshParseError(
            f"truncated STL: {count} triangles need {expected} bytes, got {len(data)} "
            f"(record data ends at byte {len(data)})"
        )
    if len(data) > expected:
        raise MeshParseError(f"STL has {len(data) - expected} trailing bytes after byte {expected}")
    if count == 0:
        raise MeshParseError("STL contains no triangles")

    vert_index: dict[tuple[float, float, float], int] = {}
    verts: list[tuple[float, float, float]] = []
    tris = np.empty((count, 3), dtype=np.int64)
    offset = STL_HEADER_LEN + 4
    for i in range(count):
        rec = struct.unpack_from("<12fH", data, offset)
        for corner in range(3):
            v = rec[3 + corner * 3 : 6 + corner * 3]
            key = (v[0], v[1], v[2])
            idx = vert_index.get(key)
            if idx is None:
                idx = len(verts)
                vert_index[key] = idx
                verts.append(key)
            tris[i, corner] = idx
        offset += STL_RECORD_LEN
    mesh_verts = np.array(verts, dtype=np.float64)
    if not np.isfinite(mesh_verts).all():
        raise MeshParseError("STL contains non-finite vertex coordinates")
    return TriangleMesh(mesh_verts, tris)


def _load_ascii_obj(data: bytes) -> TriangleMesh:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MeshParseError(f"OBJ is not valid UTF-8: {exc}") from None

    verts: list[tuple[float, float, float]] = []
    faces: list[tuple[int, list[int]]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "v":
            if len(fields) < 4:
                raise MeshParseError(f"line {line_no}: vertex needs 3 coordinates")
            try:
                coords = tuple(float(f) for f in fields[1:4])
            except ValueError:
                raise MeshParseError(f"line {line_no}: non-numeric vertex coordinate") from None
            verts.append(coords)
        elif kind == "f":
            if len(fields) < 4:
                raise MeshParseError(f"line {line_no}: face needs at least 3 indices")
            idx = []
            for f in fields[1:]:
                try:
                    i = int(f)
                except ValueError:
                    raise MeshParseError(f"line {line_no}: non-numeric face index {f!r}") from None
                if i < 0:
                    raise MeshParseError(f"line {line_no}: negative face index {i} not supported")
                if i == 0:
                    raise MeshParseError(f"line {line_no}: face indices are 1-based, got 0")
                idx.append(i - 1)
            faces.append((line_no, idx))
        # every other line type is ignored

    if not faces:
        raise MeshParseError("OBJ contains no faces")
    tris = []
    for line_no, idx in faces:
        for i in idx:
            if i >= len(verts):
                raise MeshParseError(
                    f"line {line_no}: face index {i + 1} out of range ({len(verts)} vertices)"
                )
        for k in range(1, len(idx) - 1):  # fan triangulation
            tris.append((idx[0], idx[k], idx[k + 1]))
    mesh_verts = np.array(verts, dtype=np.float64)
    if not np.isfinite(mesh_verts).all():
        raise MeshParseError("OBJ contains non-finite vertex coordinates")
    return TriangleMesh(mesh_verts, np.array(tris, dtype=np.int64))
