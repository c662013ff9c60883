"""Replicated session content: the shared transform, annotations, slices,
placements, membership, and ephemeral pointing rays."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from hybridsync.geometry.types import Ray, RigidPose, SlicePlane, Vec3
from hybridsync.quaternion import Quaternion

SCALE_MIN = 0.01
SCALE_MAX = 100.0
MAX_LABEL_BYTES = 255
MAX_MEMBERS = 16
TTL_MIN_MS = 100
TTL_MAX_MS = 60000


@dataclass(frozen=True)
class SharedTransform:
    """Model pose relative to the group anchor: uniform scale, rotation,
    then translation (p' = scale * R p + t)."""

    rotation: Quaternion
    translation: Vec3
    scale: float

    def __post_init__(self):
        t = tuple(float(c) for c in self.translation)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", float(self.scale))
        if not all(math.isfinite(c) for c in t):
            raise ValueError(f"translation must be finite, got {t}")
        if not math.isfinite(self.scale) or not SCALE_MIN <= self.scale <= SCALE_MAX:
            raise ValueError(
                f"scale must be within [{SCALE_MIN}, {SCALE_MAX}], got {self.scale}"
            )

    @classmethod
    def identity(cls) -> "SharedTransform":
        return cls(Quaternion.identity(), (0.0, 0.0, 0.0), 1.0)

    def apply_point(self, p) -> Vec3:
        r = self.rotation.rotate(p)
        t = self.translation
        s = self.scale
        return (s * r[0] + t[0], s * r[1] + t[1], s * r[2] + t[2])

    def invert_point(self, q) -> Vec3:
        t = self.translation
        s = self.scale
        d = ((q[0] - t[0]) / s, (q[1] - t[1]) / s, (q[2] - t[2]) / s)
        return self.rotation.conjugate().rotate(d)

    def invert_ray(self, ray: Ray) -> Ray:
        from hybridsync.geometry.types import normalize

        direction = self.rotation.conjugate().rotate(ray.direction)
        return Ray(self.invert_point(ray.origin), normalize(direction))


@dataclass(frozen=True)
class AnnotationRecord:
    """Persistent marker: a point on the model plus a short text label.

    The id packs the creator peer in its high 16 bits and a creator-local
    counter in the low 16.
    """

    annotation_id: int
    position: Vec3
    color: int
    label: str

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        if not 0 <= self.annotation_id <= 0xFFFFFFFF:
            raise ValueError(f"annotation_id out of u32 range: {self.annotation_id}")
        if not all(math.isfinite(c) for c in self.position):
            raise ValueError("annotation position must be finite")
        if not 0 <= self.color <= 0xFF:
            raise ValueError(f"color out of u8 range: {self.color}")
        if len(self.label.encode("utf-8")) > MAX_LABEL_BYTES:
            raise ValueError(f"label exceeds {MAX_LABEL_BYTES} UTF-8 bytes")

    @property
    def creator_peer(self) -> int:
        return self.annotation_id >> 16


@dataclass(frozen=True)
class LiveRay:
    """A peer's ephemeral pointing ray; expires, never digested."""

    ray: Ray
    expires_at: float


def ray_color(peer: int) -> float:
    """Golden-angle hue in degrees; distinct for all 16 session peers."""
    return math.fmod(peer * 137.508, 360.0)


@dataclass
class SessionState:
    transform: SharedTransform = field(default_factory=SharedTransform.identity)
    annotations: dict[int, AnnotationRecord] = field(default_factory=dict)
    slice_stack: list[SlicePlane] = field(default_factory=list)
    placements: dict[int, RigidPose] = field(default_factory=dict)
    members: dict[int, int] = field(default_factory=dict)
    last_applied_relay_seq: int = 0
    live_rays: dict[int, LiveRay] = field(default_factory=dict)

    @classmethod
    def initial(cls) -> "SessionState":
        return cls()

    def clone(self) -> "SessionState":
        """Shallow copy with fresh containers; value fields are immutable."""
        return SessionState(
            transform=self.transform,
            annotations=dict(self.annotations),
            slice_stack=list(self.slice_stack),
            placements=dict(self.placements),
            members=dict(self.members),
            last_applied_relay_seq=self.last_applied_relay_seq,
            live_rays=dict(self.live_rays),
        )
