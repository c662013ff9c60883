"""Typed payload codecs for every message type (all fields little-endian).

    TRANSFORM          quat_code u32, translation 3xf32, scale f32
    ANNOTATION_ADD     annotation_id u32, position 3xf32, color u8,
                       label_len u8, label UTF-8
    ANNOTATION_REMOVE  annotation_id u32
    POINT_RAY          origin 3xf32, direction 3xf32, ttl_ms u16
    SLICE_PUSH         normal 3xf32, offset f32 (keep half-space n.x <= offset)
    SLICE_POP          empty
    PLACE_MODEL        group_id u16, quat_code u32, position 3xf32
    JOIN               group_id u16, flags u8 (bit 0: auto-match)
    JOIN_ACK           assigned_peer u16, session_id u64
    HEARTBEAT / LEAVE  empty
    ERROR              code u8, detail_len u8, detail UTF-8
    STATE_SNAPSHOT     last_applied_relay_seq u32 + canonical state sections

Decoders validate semantics (unit vectors, scale bounds, ttl bounds,
finite floats) and raise :class:`PayloadError` on any malformed input.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum

from hybridsync.framing import MsgType
from hybridsync.geometry.types import Ray, RigidPose, SlicePlane
from hybridsync.quaternion import decode_quat, encode_quat
from hybridsync.state import (
    TTL_MAX_MS,
    TTL_MIN_MS,
    AnnotationRecord,
    SharedTransform,
)

_TRANSFORM = struct.Struct("<I3ff")
_ANNOTATION_HEAD = struct.Struct("<I3fBB")
_ANNOTATION_REMOVE = struct.Struct("<I")
_POINT_RAY = struct.Struct("<3f3fH")
_SLICE_PUSH = struct.Struct("<3ff")
_PLACE_MODEL = struct.Struct("<HI3f")
_JOIN = struct.Struct("<HB")
_JOIN_ACK = struct.Struct("<HQ")
_ERROR_HEAD = struct.Struct("<BB")

TRANSFORM_PAYLOAD_LEN = _TRANSFORM.size  # 20 bytes


class PayloadError(ValueError):
    pass


class ErrorCode(IntEnum):
    SESSION_FULL = 1
    ALREADY_PLACED = 2
    BAD_STATE = 3


@dataclass(frozen=True)
class JoinPayload:
    group_id: int
    flags: int = 0

    @property
    def auto_match(self) -> bool:
        return bool(self.flags & 1)


@dataclass(frozen=True)
class JoinAckPayload:
    assigned_peer: int
    session_id: int


@dataclass(frozen=True)
class AnnotationRemovePayload:
    annotation_id: int


@dataclass(frozen=True)
class PointRayPayload:
    ray: Ray
    ttl_ms: int


@dataclass(frozen=True)
class PlaceModelPayload:
    group_id: int
    pose: RigidPose


@dataclass(frozen=True)
class ErrorPayload:
    code: ErrorCode
    detail: str = ""


def _check_finite(values, what: str):
    if not all(math.isfinite(v) for v in values):
        raise PayloadError(f"{what} contains non-finite values")


def encode_transform(t: SharedTransform) -> bytes:
    return _TRANSFORM.pack(encode_quat(t.rotation), *t.translation, t.scale)


def decode_transform(data: bytes) -> SharedTransform:
    if len(data) != _TRANSFORM.size:
        raise PayloadError(f"TRANSFORM payload must be {_TRANSFORM.size} bytes, got {len(data)}")
    code, tx, ty, tz, scale = _TRANSFORM.unpack(data)
    _check_finite((tx, ty, tz, scale), "TRANSFORM")
    try:
        return SharedTransform(decode_quat(code), (tx, ty, tz), scale)
    except ValueError as exc:
        raise PayloadError(f"TRANSFORM rejected: {exc}") from None


def encode_annotation_add(a: AnnotationRecord) -> bytes:
    label = a.label.encode("utf-8")
    return _ANNOTATION_HEAD.pack(a.annotation_id, *a.position, a.color, len(label)) + label


def decode_annotation_add(data: bytes) -> AnnotationRecord:
    if len(data) < _ANNOTATION_HEAD.size:
        raise PayloadError(f"ANNOTATION_ADD payload too short: {len(data)} bytes")
    ann_id, px, py, pz, color, label_len = _ANNOTATION_HEAD.unpack_from(data)
    label_bytes = data[_ANNOTATION_HEAD.size :]
    if len(label_bytes) != label_len:
        raise PayloadError(
            f"ANNOTATION_ADD label length mismatch: declared {label_len}, got {len(label_bytes)}"
        )
    _check_finite((px, py, pz), "ANNOTATION_ADD position")
    try:
        label = label_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise PayloadError(f"ANNOTATION_ADD label is not valid UTF-8: {exc}") from None
    try:
        return AnnotationRecord(ann_id, (px, py, pz), color, label)
    except ValueError as exc:
        raise PayloadError(f"ANNOTATION_ADD rejected: {exc}") from None


def encode_annotation_remove(annotation_id: int) -> bytes:
    return _ANNOTATION_REMOVE.pack(annotation_id)


def decode_annotation_remove(data: bytes) -> AnnotationRemovePayload:
    if len(data) != _ANNOTATION_REMOVE.size:
        raise PayloadError(f"ANNOTATION_REMOVE payload must be 4 bytes, got {len(data)}")
    return AnnotationRemovePayload(_ANNOTATION_REMOVE.unpack(data)[0])


def encode_point_ray(ray: Ray, ttl_ms: int) -> bytes:
    if not TTL_MIN_MS <= ttl_ms <= TTL_MAX_MS:
        raise ValueError(f"ttl_ms must be within [{TTL_MIN_MS}, {TTL_MAX_MS}], got {ttl_ms}")
    return _POINT_RAY.pack(*ray.origin, *ray.direction, ttl_ms)


def decode_point_ray(data: bytes) -> PointRayPayload:
    if len(data) != _POINT_RAY.size:
        raise PayloadError(f"POINT_RAY payload must be {_POINT_RAY.size} bytes, got {len(data)}")
    ox, oy, oz, dx, dy, dz, ttl = _POINT_RAY.unpack(data)
    _check_finite((ox, oy, oz, dx, dy, dz), "POINT_RAY")
    if not TTL_MIN_MS <= ttl <= TTL_MAX_MS:
        raise PayloadError(f"POINT_RAY ttl {ttl} out of [{TTL_MIN_MS}, {TTL_MAX_MS}]")
    try:
        ray = Ray((ox, oy, oz), (dx, dy, dz))
    except ValueError as exc:
        raise PayloadError(f"POINT_RAY rejected: {exc}") from None
    return PointRayPayload(ray, ttl)


def encode_slice_push(plane: SlicePlane) -> bytes:
    return _SLICE_PUSH.pack(*plane.normal, plane.offset)


def decode_slice_push(data: bytes) -> SlicePlane:
    if len(data) != _SLICE_PUSH.size:
        raise PayloadError(f"SLICE_PUSH payload must be {_SLICE_PUSH.size} bytes, got {len(data)}")
    nx, ny, nz, offset = _SLICE_PUSH.unpack(data)
    _check_finite((nx, ny, nz, offset), "SLICE_PUSH")
    try:
        return SlicePlane((nx, ny, nz), offset)
    except ValueError as exc:
        raise PayloadError(f"SLICE_PUSH rejected: {exc}") from None


def encode_place_model(group_id: int, pose: RigidPose) -> bytes:
    return _PLACE_MODEL.pack(group_id, encode_quat(pose.rotation), *pose.translation)


def decode_place_model(data: bytes) -> PlaceModelPayload:
    if len(data) != _PLACE_MODEL.size:
        raise PayloadError(f"PLACE_MODEL payload must be {_PLACE_MODEL.size} bytes, got {len(data)}")
    group_id, code, px, py, pz = _PLACE_MODEL.unpack(data)
    _check_finite((px, py, pz), "PLACE_MODEL position")
    return PlaceModelPayload(group_id, RigidPose(decode_quat(code), (px, py, pz)))


def encode_join(group_id: int, auto_match: bool = True, flags: int = 0) -> bytes:
    if auto_match:
        flags |= 1
    return _JOIN.pack(group_id, flags)


def decode_join(data: bytes) -> JoinPayload:
    if len(data) != _JOIN.size:
        raise PayloadError(f"JOIN payload must be {_JOIN.size} bytes, got {len(data)}")
    group_id, flags = _JOIN.unpack(data)
    return JoinPayload(group_id, flags)


def encode_join_ack(assigned_peer: int, session_id: int) -> bytes:
    return _JOIN_ACK.pack(assigned_peer, session_id)


def decode_join_ack(data: bytes) -> JoinAckPayload:
    if len(data) != _JOIN_ACK.size:
        raise PayloadError(f"JOIN_ACK payload must be {_JOIN_ACK.size} bytes, got {len(data)}")
    peer, session_id = _JOIN_ACK.unpack(data)
    return JoinAckPayload(peer, session_id)


def encode_error(code: ErrorCode, detail: str = "") -> bytes:
    detail_bytes = detail.encode("utf-8")[:255]
    return _ERROR_HEAD.pack(int(code), len(detail_bytes)) + detail_bytes


def decode_error(data: bytes) -> ErrorPayload:
    if len(data) < _ERROR_HEAD.size:
        raise PayloadError(f"ERROR payload too short: {len(data)} bytes")
    code, detail_len = _ERROR_HEAD.unpack_from(data)
    detail_bytes = data[_ERROR_HEAD.size :]
    if len(detail_bytes) != detail_len:
        raise PayloadError("ERROR detail length mismatch")
    try:
        ec = ErrorCode(code)
    except ValueError:
        raise PayloadError(f"unknown error code {code}") from None
    return ErrorPayload(ec, detail_bytes.decode("utf-8", errors="replace"))


def _expect_empty(data: bytes, what: str) -> None:
    if data:
        raise PayloadError(f"{what} payload must be empty, got {len(data)} bytes")


def decode_payload(msg_type: MsgType, data: bytes):
    """Decode and validate the payload for the given message type.

    STATE_SNAPSHOT payloads are returned as raw bytes; the session layer
    parses them via ``restore``.
    """
    if msg_type == MsgType.TRANSFORM:
        return decode_transform(data)
    if msg_type == MsgType.ANNOTATION_ADD:
        return decode_annotation_add(data)
    if msg_type == MsgType.ANNOTATION_REMOVE:
        return decode_annotation_remove(data)
    if msg_type == MsgType.POINT_RAY:
        return decode_point_ray(data)
    if msg_type == MsgType.SLICE_PUSH:
        return decode_slice_push(data)
    if msg_type == MsgType.PLACE_MODEL:
        return decode_place_model(data)
    if msg_type == MsgType.JOIN:
        return decode_join(data)
    if msg_type == MsgType.JOIN_ACK:
        return decode_join_ack(data)
    if msg_type == MsgType.ERROR:
        return decode_error(data)
    if msg_type == MsgType.STATE_SNAPSHOT:
        return data
    if msg_type in (MsgType.SLICE_POP, MsgType.HEARTBEAT, MsgType.LEAVE):
        _expect_empty(data, msg_type.name)
        return None
    raise PayloadError(f"no payload codec for {msg_type!r}")
