"""Canonical state serialization and the 64-bit convergence digest.

The canonical byte form is the digest input and, seq-prefixed, the
snapshot wire format:

    transform          20 bytes (same layout as the TRANSFORM payload)
    annotation count   u16, then records sorted ascending by id
                       (ANNOTATION_ADD payload layout each)
    slice count        u16, then planes bottom-to-top (SLICE_PUSH layout)
    placement count    u16, then records sorted by group id
                       (PLACE_MODEL payload layout each)

Live pointing rays and membership are ephemeral and excluded, so two
replicas that agree on durable content digest equally regardless of who is
pointing or connected.  The digest is FNV-1a 64 over these bytes.
"""

from __future__ import annotations

import struct

from hybridsync import payloads
from hybridsync.payloads import PayloadError
from hybridsync.state import SessionState

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF

_COUNT = struct.Struct("<H")


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _U64_MASK
    return h


def canonical_state_bytes(state: SessionState) -> bytes:
    parts = [payloads.encode_transform(state.transform)]

    ann_ids = sorted(state.annotations)
    parts.append(_COUNT.pack(len(ann_ids)))
    for ann_id in ann_ids:
        parts.append(payloads.encode_annotation_add(state.annotations[ann_id]))

    parts.append(_COUNT.pack(len(state.slice_stack)))
    for plane in state.slice_stack:
        parts.append(payloads.encode_slice_push(plane))

    group_ids = sorted(state.placements)
    parts.append(_COUNT.pack(len(group_ids)))
    for group_id in group_ids:
        parts.append(payloads.encode_place_model(group_id, state.placements[group_id]))

    return b"".join(parts)


def parse_canonical_state(data: bytes) -> SessionState:
    """Inverse of :func:`canonical_state_bytes`; members and rays start empty."""
    state = SessionState.initial()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise PayloadError(f"canonical state truncated reading {what} at byte {pos}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    state.transform = payloads.decode_transform(
        take(payloads.TRANSFORM_PAYLOAD_LEN, "transform")
    )

    (ann_count,) = _COUNT.unpack(take(2, "annotation count"))
    for _ in range(ann_count):
        head = take(18, "annotation record")
        label_len = head[17]
        record = payloads.decode_annotation_add(head + take(label_len, "annotation label"))
        if record.annotation_id in state.annotations:
            raise PayloadError(f"duplicate annotation id {record.annotation_id}")
        state.annotations[record.annotation_id] = record

    (slice_count,) = _COUNT.unpack(take(2, "slice count"))
    for _ in range(slice_count):
        state.slice_stack.append(payloads.decode_slice_push(take(16, "slice plane")))

    (placement_count,) = _COUNT.unpack(take(2, "placement count"))
    for _ in range(placement_count):
        placement = payloads.decode_place_model(take(18, "placement record"))
        if placement.group_id in state.placements:
            raise PayloadError(f"duplicate placement for group {placement.group_id}")
        state.placements[placement.group_id] = placement.pose

    if pos != len(data):
        raise PayloadError(f"{len(data) - pos} trailing bytes after canonical state")
    return state


def digest_state(state: SessionState) -> int:
    """FNV-1a 64 digest of the canonical serialization."""
    return fnv1a64(canonical_state_bytes(state))


def digest_hex(state: SessionState) -> str:
    return f"{digest_state(state):016x}"
