"""Reversible cross-sectioning: clip a mesh by a stack of half-spaces.

Each triangle is clipped by every plane in order (Sutherland-Hodgman on
the triangle's polygon) and the surviving polygon is fan-triangulated.
No cap surface is generated: the open cut exposes the interior.  The input
mesh is never modified.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from hybridsync.geometry.mesh import TriangleMesh
from hybridsync.geometry.types import SlicePlane

ON_PLANE_EPS = 1e-9


class PointSide(Enum):
    KEPT = "kept"
    CUT = "cut"
    ON_PLANE = "on_plane"


def classify_point(plane: SlicePlane, p) -> PointSide:
    d = plane.signed_distance(p)
    if abs(d) <= ON_PLANE_EPS:
        return PointSide.ON_PLANE
    return PointSide.KEPT if d < 0.0 else PointSide.CUT


def _clip_polygon(points: list[np.ndarray], plane: SlicePlane) -> list[np.ndarray]:
    """One Sutherland-Hodgman pass; keeps vertices with n.p <= offset."""
    if not points:
        return []
    n = np.array(plane.normal)
    dists = [float(p @ n) - plane.offset for p in points]
    out: list[np.ndarray] = []
    count = len(points)
    for i in range(count):
        j = (i + 1) % count
        di, dj = dists[i], dists[j]
        if di <= ON_PLANE_EPS:
            out.append(points[i])
        # Emit the crossing point only on a strict sign change; a vertex
        # lying on the plane is already emitted above and needs no extra point.
        if (di > ON_PLANE_EPS and dj < -ON_PLANE_EPS) or (
            di < -ON_PLANE_EPS and dj > ON_PLANE_EPS
        ):
            t = di / (di - dj)
            out.append(points[i] + t * (points[j] - points[i]))
    return out


def clip_mesh(mesh: TriangleMesh, planes: list[SlicePlane]) -> TriangleMesh:
    """Clip against every plane in order; empty output is a valid result."""
    if not planes:
        return mesh.copy()

    vert_index: dict[tuple[float, float, float], int] = {}
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []

    def intern(p: np.ndarray) -> int:
        key = (float(p[0]), float(p[1]), float(p[2]))
        idx = vert_index.get(key)
        if idx is None:
            idx = len(verts)
            vert_index[key] = idx
            verts.append(key)
        return idx

    v0, v1, v2 = mesh.corner_arrays()
    for i in range(mesh.triangle_count):
        poly = [v0[i], v1[i], v2[i]]
        for plane in planes:
            poly = _clip_polygon(poly, plane)
            if len(poly) < 3:
                break
        if len(poly) < 3:
            continue
        ids = [intern(p) for p in poly]
        for k in range(1, len(ids) - 1):
            a, b, c = ids[0], ids[k], ids[k + 1]
            if a == b or b == c or a == c:
                continue  # exact-duplicate corner, zero area
            tris.append((a, b, c))

    return TriangleMesh(
        np.array(verts, dtype=np.float64).reshape(-1, 3),
        np.array(tris, dtype=np.int64).reshape(-1, 3),
        allow_empty=True,
    )
