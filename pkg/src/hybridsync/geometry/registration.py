"""Least-squares rigid registration of corresponded point sets.

Solves for the rotation R and translation t minimizing
``sum |R src[i] + t - dst[i]|^2`` via centroid subtraction, the 3x3
cross-covariance, and an SVD with a reflection guard on the determinant.
"""

from __future__ import annotations

import numpy as np

from hybridsync.geometry.types import RigidPose
from hybridsync.quaternion import Quaternion

DEGENERACY_RATIO = 1e-9


class DegenerateInputError(ValueError):
    pass


def estimate_rigid_transform(src, dst) -> RigidPose:
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 3 or dst.ndim != 2 or dst.shape[1] != 3:
        raise ValueError("point sets must be (N, 3) arrays")
    if src.shape[0] != dst.shape[0]:
        raise DegenerateInputError(
            f"point counts differ: {src.shape[0]} vs {dst.shape[0]}"
        )
    if src.shape[0] < 3:
        raise DegenerateInputError(f"need at least 3 correspondences, got {src.shape[0]}")
    if not (np.isfinite(src).all() and np.isfinite(dst).all()):
        raise ValueError("point sets contain NaN or Inf")

    centroid_src = src.mean(axis=0)
    centroid_dst = dst.mean(axis=0)
    h = (src - centroid_src).T @ (dst - centroid_dst)
    u, sing, vt = np.linalg.svd(h)
    if sing[0] <= 0.0 or sing[1] / sing[0] < DEGENERACY_RATIO:
        raise DegenerateInputError(
            "degenerate configuration (coincident or collinear points): "
            f"singular values {sing.tolist()}"
        )
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    r = v @ np.diag([1.0, 1.0, d]) @ u.T
    t = centroid_dst - r @ centroid_src
    return RigidPose(Quaternion.from_matrix(r), tuple(t))
