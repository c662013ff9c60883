"""The replicated state machine every participant runs.

Messages arrive in relay-stamped order and are applied as pure state
transitions: ``apply_message`` never mutates its input, so a replica can be
copied and replayed freely.  Conflicting edits resolve by last-writer-wins
in relay order; duplicate or missing-target operations are no-ops rather
than errors so replays and races stay harmless.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from hybridsync.digest import canonical_state_bytes, parse_canonical_state
from hybridsync.framing import Frame, MsgType
from hybridsync.payloads import PayloadError, decode_payload
from hybridsync.state import MAX_MEMBERS, LiveRay, SessionState, ray_color

__all__ = [
    "Effect",
    "OrderingError",
    "SnapshotError",
    "STATE_MSG_TYPES",
    "apply_message",
    "expire_rays",
    "snapshot",
    "restore",
    "ray_color",
]

_SEQ = struct.Struct("<I")


class OrderingError(Exception):
    """Frame arrived out of relay order; the caller must not skip frames."""


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class Effect:
    """Applied/ignored outcome of one message, for observability."""

    op: str
    applied: bool
    detail: str = ""


# Message types a relay may stamp into the ordered stream.
STATE_MSG_TYPES = frozenset(
    {
        MsgType.TRANSFORM,
        MsgType.ANNOTATION_ADD,
        MsgType.ANNOTATION_REMOVE,
        MsgType.POINT_RAY,
        MsgType.SLICE_PUSH,
        MsgType.SLICE_POP,
        MsgType.PLACE_MODEL,
        MsgType.JOIN,
        MsgType.LEAVE,
    }
)


def apply_message(
    state: SessionState, frame: Frame, now: float
) -> tuple[SessionState, list[Effect]]:
    """Apply one relay-ordered frame, returning the next state and effects.

    Raises :class:`OrderingError` if the frame's relay_seq does not advance
    past the state's, and :class:`PayloadError` (state unchanged) on any
    malformed payload.
    """
    if frame.relay_seq <= state.last_applied_relay_seq:
        raise OrderingError(
            f"relay_seq {frame.relay_seq} not after {state.last_applied_relay_seq}"
        )
    if frame.msg_type not in STATE_MSG_TYPES:
        raise PayloadError(f"{frame.msg_type.name} frames do not belong in the ordered stream")

    payload = decode_payload(frame.msg_type, frame.payload)
    new = state.clone()
    new.last_applied_relay_seq = frame.relay_seq
    effects: list[Effect] = []

    mt = frame.msg_type
    if mt == MsgType.TRANSFORM:
        new.transform = payload
        effects.append(Effect("transform", True))
    elif mt == MsgType.ANNOTATION_ADD:
        if payload.annotation_id in new.annotations:
            effects.append(Effect("annotation_add", False, "duplicate id"))
        else:
            new.annotations[payload.annotation_id] = payload
            effects.append(Effect("annotation_add", True))
    elif mt == MsgType.ANNOTATION_REMOVE:
        if new.annotations.pop(payload.annotation_id, None) is None:
            effects.append(Effect("annotation_remove", False, "no such id"))
        else:
            effects.append(Effect("annotation_remove", True))
    elif mt == MsgType.SLICE_PUSH:
        new.slice_stack.append(payload)
        effects.append(Effect("slice_push", True))
    elif mt == MsgType.SLICE_POP:
        if new.slice_stack:
            new.slice_stack.pop()
            effects.append(Effect("slice_pop", True))
        else:
            effects.append(Effect("slice_pop", False, "empty stack"))
    elif mt == MsgType.PLACE_MODEL:
        if payload.group_id in new.placements:
            effects.append(Effect("place_model", False, "ALREADY_PLACED"))
        else:
            new.placements[payload.group_id] = payload.pose
            effects.append(Effect("place_model", True))
    elif mt == MsgType.POINT_RAY:
        new.live_rays[frame.sender_peer] = LiveRay(
            payload.ray, now + payload.ttl_ms / 1000.0
        )
        effects.append(Effect("point_ray", True))
    elif mt == MsgType.JOIN:
        if frame.sender_peer in new.members:
            new.members[frame.sender_peer] = payload.group_id
            effects.append(Effect("join", False, "already a member"))
        elif len(new.members) >= MAX_MEMBERS:
            effects.append(Effect("join", False, "session full"))
        else:
            new.members[frame.sender_peer] = payload.group_id
            effects.append(Effect("join", True))
    elif mt == MsgType.LEAVE:
        new.members.pop(frame.sender_peer, None)
        new.live_rays.pop(frame.sender_peer, None)
        effects.append(Effect("leave", True))

    return new, effects


def expire_rays(state: SessionState, now: float) -> SessionState:
    """Drop live rays whose expiry has passed; digests never change."""
    expired = [peer for peer, lr in state.live_rays.items() if lr.expires_at <= now]
    if not expired:
        return state
    new = state.clone()
    for peer in expired:
        del new.live_rays[peer]
    return new


def snapshot(state: SessionState) -> bytes:
    """Canonical bytes prefixed with last_applied_relay_seq (u32)."""
    return _SEQ.pack(state.last_applied_relay_seq) + canonical_state_bytes(state)


def restore(data: bytes) -> SessionState:
    """Rebuild a replica from a snapshot; members and live rays start empty."""
    if len(data) < _SEQ.size:
        raise SnapshotError(f"snapshot too short: {len(data)} bytes")
    (seq,) = _SEQ.unpack_from(data)
    try:
        state = parse_canonical_state(data[_SEQ.size :])
    except PayloadError as exc:
        raise SnapshotError(str(exc)) from None
    state.last_applied_relay_seq = seq
    return state
