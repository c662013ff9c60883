"""Rays, slicing planes, and rigid poses.

Conventions: a :class:`SlicePlane` keeps the half-space ``n . x <= offset``.
A :class:`RigidPose` maps points by ``p' = R p + t``; ``compose_pose(a, b)``
applies ``b`` first, then ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from hybridsync.quaternion import Quaternion

UNIT_TOL = 1e-6

Vec3 = tuple[float, float, float]


def _as_vec3(v) -> Vec3:
    x, y, z = v
    return (float(x), float(y), float(z))


def _check_finite(v: Vec3, what: str):
    if not all(math.isfinite(c) for c in v):
        raise ValueError(f"{what} must be finite, got {v}")


def _norm(v: Vec3) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def normalize(v) -> Vec3:
    v = _as_vec3(v)
    n = _norm(v)
    if n == 0.0 or not math.isfinite(n):
        raise ValueError(f"cannot normalize {v}")
    return (v[0] / n, v[1] / n, v[2] / n)


@dataclass(frozen=True)
class Ray:
    origin: Vec3
    direction: Vec3

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin))
        object.__setattr__(self, "direction", _as_vec3(self.direction))
        _check_finite(self.origin, "ray origin")
        _check_finite(self.direction, "ray direction")
        if abs(_norm(self.direction) - 1.0) > UNIT_TOL:
            raise ValueError(f"ray direction must be unit length, got {self.direction}")

    @classmethod
    def toward(cls, origin, target) -> "Ray":
        o = _as_vec3(origin)
        t = _as_vec3(target)
        return cls(o, normalize((t[0] - o[0], t[1] - o[1], t[2] - o[2])))


@dataclass(frozen=True)
class SlicePlane:
    normal: Vec3
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", _as_vec3(self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        _check_finite(self.normal, "plane normal")
        if not math.isfinite(self.offset):
            raise ValueError("plane offset must be finite")
        if abs(_norm(self.normal) - 1.0) > UNIT_TOL:
            raise ValueError(f"plane normal must be unit length, got {self.normal}")

    def signed_distance(self, p) -> float:
        x, y, z = p
        return self.normal[0] * x + self.normal[1] * y + self.normal[2] * z - self.offset

    def flipped(self) -> "SlicePlane":
        n = self.normal
        return SlicePlane((-n[0], -n[1], -n[2]), -self.offset)


@dataclass(frozen=True)
class RigidPose:
    rotation: Quaternion = field(default_factory=Quaternion.identity)
    translation: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "translation", _as_vec3(self.translation))
        _check_finite(self.translation, "pose translation")

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls()

    def apply(self, p) -> Vec3:
        r = self.rotation.rotate(p)
        t = self.translation
        return (r[0] + t[0], r[1] + t[1], r[2] + t[2])


def compose_pose(a: RigidPose, b: RigidPose) -> RigidPose:
    """Pose applying b first, then a."""
    return RigidPose(a.rotation * b.rotation, a.apply(b.translation))


def invert_pose(a: RigidPose) -> RigidPose:
    conj = a.rotation.conjugate()
    t = conj.rotate(a.translation)
    return RigidPose(conj, (-t[0], -t[1], -t[2]))


def transform_point(pose: RigidPose, p) -> Vec3:
    return pose.apply(p)


def transform_ray(pose: RigidPose, ray: Ray) -> Ray:
    """Map origin by the full pose and direction by rotation only, renormalized."""
    return Ray(pose.apply(ray.origin), normalize(pose.rotation.rotate(ray.direction)))
