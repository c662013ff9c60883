"""Ray/mesh intersection via the Moller-Trumbore test over every triangle.

Every triangle is tested (vectorized); the hit with the smallest t >= 0
wins, ties broken by the lowest triangle index.  Any future acceleration
structure must reproduce these results exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hybridsync.geometry.mesh import TriangleMesh
from hybridsync.geometry.types import Ray, Vec3

DET_EPS = 1e-9


@dataclass(frozen=True)
class RayHit:
    point: Vec3
    triangle_index: int
    t: float


def ray_intersect(mesh: TriangleMesh, ray: Ray) -> RayHit | None:
    if mesh.triangle_count == 0:
        return None
    v0, v1, v2 = mesh.corner_arrays()
    o = np.array(ray.origin)
    d = np.array(ray.direction)

    e1 = v1 - v0
    e2 = v2 - v0
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    valid = np.abs(det) >= DET_EPS
    inv_det = np.where(valid, 1.0 / np.where(valid, det, 1.0), 0.0)

    s = o - v0
    u = np.einsum("ij,ij->i", s, p) * inv_det
    valid &= (u >= 0.0) & (u <= 1.0)
    q = np.cross(s, e1)
    v = (q @ d) * inv_det
    valid &= (v >= 0.0) & (u + v <= 1.0)
    t = np.einsum("ij,ij->i", e2, q) * inv_det
    valid &= t >= 0.0

    if not valid.any():
        return None
    t_masked = np.where(valid, t, np.inf)
    idx = int(np.argmin(t_masked))  # argmin takes the first minimum: lowest index wins ties
    t_hit = float(t[idx])
    point = (
        ray.origin[0] + t_hit * ray.direction[0],
        ray.origin[1] + t_hit * ray.direction[1],
        ray.origin[2] + t_hit * ray.direction[2],
    )
    return RayHit(point=point, triangle_index=idx, t=t_hit)
