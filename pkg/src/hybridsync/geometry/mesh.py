"""Immutable triangle meshes plus the built-in test/demo shapes."""

from __future__ import annotations

import math

import numpy as np


class TriangleMesh:
    """Vertex/index triangle mesh.

    Vertices are an (N, 3) float64 array, triangles an (M, 3) int64 array of
    vertex indices.  Instances are immutable after construction; operations
    that derive new geometry return new meshes.
    """

    def __init__(self, vertices, triangles, *, allow_empty: bool = False):
        v = np.asarray(vertices, dtype=np.float64)
        t = np.asarray(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (N, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError(f"triangles must be (M, 3), got {t.shape}")
        if not allow_empty and len(t) < 1:
            raise ValueError("mesh must contain at least one triangle")
        if len(v) and not np.isfinite(v).all():
            raise ValueError("mesh vertices contain NaN or Inf")
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        self._vertices = v
        self._vertices.setflags(write=False)
        self._triangles = t
        self._triangles.setflags(write=False)
        self._corners = None

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def triangles(self) -> np.ndarray:
        return self._triangles

    @property
    def triangle_count(self) -> int:
        return len(self._triangles)

    def corner_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-triangle corner positions (v0, v1, v2), cached."""
        if self._corners is None:
            tri = self._triangles
            self._corners = (
                self._vertices[tri[:, 0]],
                self._vertices[tri[:, 1]],
                self._vertices[tri[:, 2]],
            )
        return self._corners

    def area(self) -> float:
        if len(self._triangles) == 0:
            return 0.0
        v0, v1, v2 = self.corner_arrays()
        cross = np.cross(v1 - v0, v2 - v0)
        return float(0.5 * np.linalg.norm(cross, axis=1).sum())

    def copy(self) -> "TriangleMesh":
        return TriangleMesh(
            self._vertices.copy(), self._triangles.copy(), allow_empty=True
        )

    def same_geometry(self, other: "TriangleMesh") -> bool:
        """Bit-for-bit equality of vertex and index arrays."""
        return (
            self._vertices.shape == other._vertices.shape
            and self._triangles.shape == other._triangles.shape
            and np.array_equal(self._vertices, other._vertices)
            and np.array_equal(self._triangles, other._triangles)
        )

    def __repr__(self):
        return f"TriangleMesh({len(self._vertices)} vertices, {len(self._triangles)} triangles)"


def make_unit_cube(center=(0.0, 0.0, 0.0), size: float = 1.0) -> TriangleMesh:
    """Axis-aligned cube, 8 vertices and 12 triangles."""
    cx, cy, cz = center
    h = size / 2.0
    verts = np.array(
        [
            [cx - h, cy - h, cz - h],
            [cx + h, cy - h, cz - h],
            [cx + h, cy + h, cz - h],
            [cx - h, cy + h, cz - h],
            [cx - h, cy - h, cz + h],
            [cx + h, cy - h, cz + h],
            [cx + h, cy + h, cz + h],
            [cx - h, cy + h, cz + h],
        ]
    )
    tris = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # z = -h
            [4, 5, 6], [4, 6, 7],  # z = +h
            [0, 1, 5], [0, 5, 4],  # y = -h
            [2, 3, 7], [2, 7, 6],  # y = +h
            [1, 2, 6], [1, 6, 5],  # x = +h
            [0, 4, 7], [0, 7, 3],  # x = -h
        ]
    )
    return TriangleMesh(verts, tris)


def make_reference_mesh(slices: int = 100, stacks: int = 51) -> TriangleMesh:
    """Deterministic bumpy sphere used as the default shared model.

    With the default parameters the surface has exactly
    ``2 * slices * (stacks - 1) = 10000`` triangles.  The radial bumps keep
    the shape star-shaped around the origin (radius stays within
    [0.35, 0.65]), so rays aimed at the origin from outside always hit.
    """
    verts = []
    for i in range(stacks + 1):
        theta = math.pi * i / stacks  # polar angle from +z
        for j in range(slices):
            phi = 2.0 * math.pi * j / slices
            r = 0.5 * (
                1.0
                + 0.18 * math.sin(3.0 * phi) * math.sin(2.0 * theta)
                + 0.10 * math.cos(5.0 * theta + 1.0) * math.sin(theta)
            )
            verts.append(
                (
                    r * math.sin(theta) * math.cos(phi),
                    r * math.sin(theta) * math.sin(phi),
                    r * math.cos(theta),
                )
            )

    def vid(i, j):
        return i * slices + (j % slices)

    tris = []
    for i in range(stacks):
        for j in range(slices):
            a = vid(i, j)
            b = vid(i + 1, j)
            c = vid(i + 1, j + 1)
            d = vid(i, j + 1)
            if i > 0:  # skip degenerate fan at the +z pole ring
                tris.append((a, b, d))
            if i < stacks - 1:  # skip degenerate fan at the -z pole ring
                tris.append((b, c, d))
    return TriangleMesh(np.array(verts), np.array(tris))
