"""Binary wire envelope shared by every protocol message.

Layout (little-endian), 24-byte header followed by the payload:

    bytes 0-1    magic 0x48 0x43 ("HC")
    byte  2      version (1)
    byte  3      msg_type
    bytes 4-11   session_id   u64
    bytes 12-13  sender_peer  u16
    bytes 14-17  relay_seq    u32  (0 on client->relay; stamped by the relay)
    bytes 18-21  sender_seq   u32
    bytes 22-23  payload_len  u16
    bytes 24-    payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

MAGIC = b"HC"
VERSION = 1
HEADER_LEN = 24
MAX_PAYLOAD = 0xFFFF

_HEADER = struct.Struct("<2sBBQHIIH")

# sender_peer value used on frames originated by the relay itself.
RELAY_PEER = 0xFFFF


class MsgType(IntEnum):
    JOIN = 1
    JOIN_ACK = 2
    LEAVE = 3
    PLACE_MODEL = 4
    TRANSFORM = 5
    ANNOTATION_ADD = 6
    ANNOTATION_REMOVE = 7
    POINT_RAY = 8
    SLICE_PUSH = 9
    SLICE_POP = 10
    HEARTBEAT = 11
    STATE_SNAPSHOT = 12
    ERROR = 13


class FrameError(ValueError):
    """Base class for frame decode failures; always recoverable."""


class BadMagic(FrameError):
    pass


class BadVersion(FrameError):
    pass


class Truncated(FrameError):
    pass


class LengthMismatch(FrameError):
    pass


class UnknownMsgType(FrameError):
    pass


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    session_id: int = 0
    sender_peer: int = 0
    relay_seq: int = 0
    sender_seq: int = 0
    payload: bytes = field(default=b"", repr=False)

    def __post_init__(self):
        if not 0 <= self.session_id <= 0xFFFFFFFFFFFFFFFF:
            raise ValueError(f"session_id out of u64 range: {self.session_id}")
        if not 0 <= self.sender_peer <= 0xFFFF:
            raise ValueError(f"sender_peer out of u16 range: {self.sender_peer}")
        if not 0 <= self.relay_seq <= 0xFFFFFFFF:
            raise ValueError(f"relay_seq out of u32 range: {self.relay_seq}")
        if not 0 <= self.sender_seq <= 0xFFFFFFFF:
            raise ValueError(f"sender_seq out of u32 range: {self.sender_seq}")
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError(f"payload too large: {len(self.payload)} bytes")


def encode_frame(frame: Frame) -> bytes:
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        int(frame.msg_type),
        frame.session_id,
        frame.sender_peer,
        frame.relay_seq,
        frame.sender_seq,
        len(frame.payload),
    )
    return header + frame.payload


def decode_frame(data: bytes) -> Frame:
    if len(data) < HEADER_LEN:
        raise Truncated(f"frame needs at least {HEADER_LEN} bytes, got {len(data)}")
    magic, version, msg_type, session_id, sender_peer, relay_seq, sender_seq, payload_len = (
        _HEADER.unpack_from(data)
    )
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    if len(data) != HEADER_LEN + payload_len:
        raise LengthMismatch(
            f"declared payload of {payload_len} bytes but frame is {len(data)} bytes"
        )
    try:
        mt = MsgType(msg_type)
    except ValueError:
        raise UnknownMsgType(f"unknown msg_type {msg_type}") from None
    return Frame(
        msg_type=mt,
        session_id=session_id,
        sender_peer=sender_peer,
        relay_seq=relay_seq,
        sender_seq=sender_seq,
        payload=data[HEADER_LEN:],
    )


def stamp_relay_seq(data: bytes, relay_seq: int) -> bytes:
    """Rewrite only the relay_seq field, leaving every other byte intact."""
    if not 0 <= relay_seq <= 0xFFFFFFFF:
        raise ValueError(f"relay_seq out of u32 range: {relay_seq}")
    return data[:14] + struct.pack("<I", relay_seq) + data[18:]


def rewrite_sender_peer(data: bytes, sender_peer: int) -> bytes:
    """Rewrite only the sender_peer field (relay-assigned id on JOIN fan-out)."""
    if not 0 <= sender_peer <= 0xFFFF:
        raise ValueError(f"sender_peer out of u16 range: {sender_peer}")
    return data[:12] + struct.pack("<H", sender_peer) + data[14:]


def rewrite_session_id(data: bytes, session_id: int) -> bytes:
    """Rewrite only the session_id field (resolved id on auto-match JOINs)."""
    if not 0 <= session_id <= 0xFFFFFFFFFFFFFFFF:
        raise ValueError(f"session_id out of u64 range: {session_id}")
    return data[:4] + struct.pack("<Q", session_id) + data[12:]


class StreamParser:
    """Incremental splitter for a byte stream of concatenated frames.

    ``feed`` returns the complete frames found so far as raw byte strings;
    header corruption raises immediately since a stream with a bad header
    cannot be resynchronized.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        frames: list[bytes] = []
        while len(self._buf) >= HEADER_LEN:
            if bytes(self._buf[:2]) != MAGIC:
                raise BadMagic(f"bad magic {bytes(self._buf[:2])!r} in stream")
            if self._buf[2] != VERSION:
                raise BadVersion(f"unsupported version {self._buf[2]} in stream")
            payload_len = struct.unpack_from("<H", self._buf, 22)[0]
            total = HEADER_LEN + payload_len
            if len(self._buf) < total:
                break
            frames.append(bytes(self._buf[:total]))
            del self._buf[:total]
        return frames

    @property
    def pending(self) -> int:
        return len(self._buf)
